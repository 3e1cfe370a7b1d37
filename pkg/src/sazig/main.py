import argparse
import logging
import sys
from typing import List, Optional

from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn

from . import __version__
from .config import (CooccurrenceSpec, FitConfig, OutputLayout, Schedule, ShapeMode, SimConfig, SimSeeds,
                     SweepOrder)
from .cooccur import Vocabulary, build_matrix, build_vocab, read_sentences
from .diagnostics import failure_signature
from .embed import EmbeddingView, ViewSource, neighbors_frame, save_embeddings, save_similarity, top_k
from .errors import FormatError, SazigError, ValidationError
from .model import Link, load_model, save_model
from .reporter import ReporterFactory
from .simulate import InitSetting, generate, make_init
from .sparse import load_triples, save_triples
from .trainer import fit
from .utils import close_tokens, setup_logging

EXIT_OK = 0
EXIT_RUNTIME = 3
EXIT_IO = 4

console = Console(stderr=True)
logger = logging.getLogger(__name__)


def _manifest(layout: OutputLayout, command: str, config: dict, inputs: dict, artifacts: dict, seed=None):
    ReporterFactory.create_reporter(
        'manifest', layout.manifest_file,
        command=command, config=config, inputs=inputs, artifacts=artifacts, seed=seed,
    ).generate()


def cmd_simulate(args) -> int:
    config = SimConfig(n=args.n, d=args.d, shape=args.shape, seeds=SimSeeds().shifted(args.seed))
    layout = OutputLayout(args.out)
    layout.ensure()
    setup_logging(layout.log_file)

    Y, truth = generate(config)
    init = make_init(InitSetting(args.setting), truth, config)
    save_triples(Y, layout.matrix_file)
    save_model(truth, layout.truth_file)
    save_model(init, layout.init_file)

    resolved = dict(config.to_dict(), setting=args.setting)
    _manifest(layout, 'simulate', resolved, {},
              {'matrix': layout.matrix_file, 'truth': layout.truth_file, 'init': layout.init_file},
              seed=args.seed)

    console.print(Panel(f"[bold]Matrix:[/bold] {Y.n_rows}x{Y.n_cols}, {Y.nnz} positives\n"
                        f"[bold]Setting:[/bold] {args.setting}\n"
                        f"[bold]Output:[/bold] {layout.out_dir}",
                        title="Simulation", border_style="green"))
    return EXIT_OK


def _fit_config(args, init) -> FitConfig:
    if args.link is not None:
        link = Link(args.link)
    else:
        link = init.link if init is not None else Link.LOG

    shape_mode = args.shape_mode
    if shape_mode is None:
        # a checkpoint or a user-supplied shape is kept as is
        shape_mode = ShapeMode.FIXED if (init is not None or args.shape is not None) else ShapeMode.ESTIMATE_ONCE

    return FitConfig(
        link=link,
        max_iterations=args.max_iter,
        inner_epochs=args.epochs,
        lr=args.lr,
        lr_schedule=Schedule(args.lr_schedule),
        epsilon=args.epsilon,
        seed=args.seed,
        dim=init.d if init is not None else args.dim,
        shape=args.shape,
        shape_mode=ShapeMode(shape_mode),
        order=SweepOrder(args.order),
        threads=args.threads,
    )


def cmd_fit(args) -> int:
    layout = OutputLayout(args.out)
    layout.ensure()
    setup_logging(layout.log_file)

    Y = load_triples(args.matrix)
    inputs = {'matrix': args.matrix}
    init = None
    if args.init != 'random':
        init = load_model(args.init)
        inputs['init'] = args.init
    config = _fit_config(args, init)

    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  console=console, transient=True) as progress:
        progress.add_task("[cyan]Fitting...", total=None)
        state, trace = fit(Y, config, init)

    save_model(state, layout.checkpoint_file)
    trace.save(layout.trace_file)
    failure = failure_signature(trace.losses, trace.score_norms)
    ReporterFactory.create_reporter('diagnostics', layout.diagnostics_file,
                                    trace=trace, state=state, failure=failure).generate()
    _manifest(layout, 'fit', config.to_dict(), inputs,
              {'checkpoint': layout.checkpoint_file, 'trace': layout.trace_file,
               'diagnostics': layout.diagnostics_file},
              seed=args.seed)

    final = trace.losses[-1] if trace.losses else trace.initial_loss
    console.print(Panel(f"[bold]Iterations:[/bold] {len(trace)} (converged: {trace.converged})\n"
                        f"[bold]Loss:[/bold] {trace.initial_loss:.6f} -> {final:.6f}\n"
                        f"[bold]Halvings:[/bold] {trace.total_halvings}\n"
                        f"[bold]Checkpoint:[/bold] {layout.checkpoint_file}",
                        title="Fit", border_style="green"))
    return EXIT_OK


def cmd_cooccur(args) -> int:
    spec = CooccurrenceSpec(window=args.window, vocab_size=args.vocab_size)
    layout = OutputLayout(args.out)
    layout.ensure()
    setup_logging(layout.log_file)

    sentences = read_sentences(args.text)
    vocab = build_vocab(sentences, spec.vocab_size)
    Y = build_matrix(sentences, vocab, spec.window, spec.exclude_self)
    save_triples(Y, layout.matrix_file)
    vocab.save(layout.vocab_file)

    _manifest(layout, 'cooccur', dict(spec.to_dict(), actual_vocab_size=len(vocab)), {'text': args.text},
              {'matrix': layout.matrix_file, 'vocab': layout.vocab_file})
    console.print(f"[green]✓ {len(sentences)} sentences, vocabulary {len(vocab)}, {Y.nnz} positive cells[/green]")
    return EXIT_OK


def _resolve_query(query: str, vocab: Optional[Vocabulary], n: int) -> int:
    if vocab is not None:
        if query in vocab:
            return vocab.index[query]
        near = close_tokens(query, vocab.tokens)
        hint = f"; closest: {', '.join(near)}" if near else ""
        raise ValidationError(f"token '{query}' is not in the vocabulary{hint}")
    try:
        index = int(query)
    except ValueError:
        raise ValidationError(f"query '{query}' must be an index when no vocabulary is given") from None
    if not 0 <= index < n:
        raise ValidationError(f"index {index} out of range [0, {n})")
    return index


def _load_vocab(path: Optional[str], n: int) -> Optional[Vocabulary]:
    if path is None:
        return None
    vocab = Vocabulary.load(path)
    if len(vocab) != n:
        raise FormatError(f"{path}: {len(vocab)} tokens for {n} vectors")
    return vocab


def cmd_similar(args) -> int:
    setup_logging(level=logging.WARNING)
    view = EmbeddingView.from_state(load_model(args.model), ViewSource(args.view))
    vocab = _load_vocab(args.vocab, view.n)
    index = _resolve_query(args.query, vocab, view.n)

    neighbors = top_k(view, index, args.k)
    frame = neighbors_frame(neighbors, vocab.tokens if vocab else None)
    frame.to_csv(sys.stdout, sep='\t', index=False, float_format='%.9g', lineterminator='\n')
    return EXIT_OK


def cmd_export(args) -> int:
    setup_logging(level=logging.WARNING)
    view = EmbeddingView.from_state(load_model(args.model), ViewSource(args.view))
    vocab = _load_vocab(args.vocab, view.n)
    tokens = vocab.tokens if vocab else None

    save_embeddings(view, args.out, tokens)
    if args.similarity:
        save_similarity(view, args.similarity, tokens)
    console.print(f"[green]✓ Exported {view.n} {view.source.value} vectors to {args.out}[/green]")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="sazig", formatter_class=fmt,
                                     description="Shared-parameter zero-inflated Gamma factorization")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    subparsers.required = True

    # Command: simulate
    sim = subparsers.add_parser("simulate", formatter_class=fmt, help="Generate synthetic ZIG data")
    sim.add_argument("--n", type=int, default=300, help="Rows and columns of the square matrix")
    sim.add_argument("--d", type=int, default=50, help="Latent dimension")
    sim.add_argument("--shape", type=float, default=4.0, help="Gamma shape nu")
    sim.add_argument("--setting", type=int, choices=[1, 2], default=1,
                     help="Initialization: 1 = truth except column vectors, 2 = all random")
    sim.add_argument("--seed", type=int, default=0, help="Offset applied to every seed stream")
    sim.add_argument("--out", required=True, help="Output directory")
    sim.set_defaults(handler=cmd_simulate)

    # Command: fit
    fp = subparsers.add_parser("fit", formatter_class=fmt, help="Fit the model by alternating Fisher scoring")
    fp.add_argument("--matrix", required=True, help="Input matrix in triples format")
    fp.add_argument("--link", choices=[l.value for l in Link], default=None,
                    help="Gamma link (default: the checkpoint's link, else log)")
    fp.add_argument("--lr", type=float, default=0.5, help="Learning rate for the power-quarter schedule")
    fp.add_argument("--lr-schedule", choices=[s.value for s in Schedule], default=Schedule.POWER_QUARTER.value,
                    help="Step multiplier schedule")
    fp.add_argument("--epochs", type=int, default=20, help="Inner epochs per index")
    fp.add_argument("--max-iter", type=int, default=60, help="Maximum outer iterations (0 only evaluates)")
    fp.add_argument("--epsilon", type=float, default=1e-6, help="Relative loss change for convergence")
    fp.add_argument("--init", default="random", help="Initial model checkpoint, or 'random'")
    fp.add_argument("--seed", type=int, default=0, help="Seed for random initialization")
    fp.add_argument("--dim", type=int, default=20, help="Latent dimension for random initialization")
    fp.add_argument("--shape", type=float, default=None, help="Fixed Gamma shape")
    fp.add_argument("--shape-mode", choices=[m.value for m in ShapeMode], default=None,
                    help="Shape handling (default: fixed with --init or --shape, else estimate-once)")
    fp.add_argument("--order", choices=[o.value for o in SweepOrder], default=SweepOrder.INTERLEAVED.value,
                    help="Sweep order over rows and columns")
    fp.add_argument("--threads", type=int, default=1, help="Workers for loss and score evaluation")
    fp.add_argument("--out", required=True, help="Output directory")
    fp.set_defaults(handler=cmd_fit)

    # Command: cooccur
    co = subparsers.add_parser("cooccur", formatter_class=fmt, help="Build a weighted co-occurrence matrix")
    co.add_argument("--text", required=True, help="Tokenized text, one sentence per line")
    co.add_argument("--vocab-size", type=int, default=300, help="Number of most frequent tokens kept")
    co.add_argument("--window", type=int, default=10, help="Maximum token separation")
    co.add_argument("--out", required=True, help="Output directory")
    co.set_defaults(handler=cmd_cooccur)

    # Command: similar
    si = subparsers.add_parser("similar", formatter_class=fmt, help="Nearest neighbors by cosine similarity")
    si.add_argument("--model", required=True, help="Model checkpoint")
    si.add_argument("--vocab", default=None, help="vocab.tsv naming the indices")
    si.add_argument("--query", required=True, help="Token (or index without --vocab)")
    si.add_argument("--k", type=int, default=5, help="Number of neighbors")
    si.add_argument("--view", choices=[v.value for v in ViewSource], default=ViewSource.ROW.value,
                    help="Vector set used for similarity")
    si.set_defaults(handler=cmd_similar)

    # Command: export
    ex = subparsers.add_parser("export", formatter_class=fmt, help="Export embeddings as TSV")
    ex.add_argument("--model", required=True, help="Model checkpoint")
    ex.add_argument("--vocab", default=None, help="vocab.tsv naming the indices")
    ex.add_argument("--view", choices=[v.value for v in ViewSource], default=ViewSource.ROW.value,
                    help="Vector set to export")
    ex.add_argument("--out", required=True, help="Embeddings TSV path")
    ex.add_argument("--similarity", default=None, help="Also write the pairwise cosine matrix here")
    ex.set_defaults(handler=cmd_export)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except KeyboardInterrupt:
        console.print("\n[bold red]Operation cancelled by user.[/bold red]")
        return EXIT_RUNTIME
    except SazigError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        logger.debug("Failure details", exc_info=True)
        return e.exit_code
    except OSError as e:
        console.print(f"[bold red]I/O error:[/bold red] {e}")
        return EXIT_IO
    except Exception as e:
        console.print(f"\n[bold red]Unexpected Error:[/bold red] {e}")
        logging.exception("Fatal error")
        return EXIT_RUNTIME


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
