from abc import ABC, abstractmethod
import json
import logging
import math
import os
from typing import Dict, Optional

from . import __version__
from .utils import sha256_file

logger = logging.getLogger(__name__)


def convert_numpy(obj):
    """Plain JSON types; NaN and infinities become null."""
    if hasattr(obj, 'tolist') and not isinstance(obj, (str, bytes)):
        obj = obj.tolist()
    elif hasattr(obj, 'item'):
        obj = obj.item()
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return None
    if isinstance(obj, dict):
        return {str(k): convert_numpy(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [convert_numpy(i) for i in obj]
    return obj


class Reporter(ABC):
    """Abstract base class for run reporters."""

    def __init__(self, path: str):
        self.path = path

    @abstractmethod
    def payload(self) -> dict:
        pass

    def generate(self) -> str:
        with open(self.path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(convert_numpy(self.payload()), f, indent=2, sort_keys=True)
            f.write('\n')
        logger.info(f"Report generated: {self.path}")
        return self.path


class ManifestReporter(Reporter):
    """Everything needed to re-run a subcommand and check its artifacts.

    Holds no timestamps, so two identical runs produce identical manifests.
    Paths are recorded relative to the output directory where possible.
    """

    def __init__(self, path: str, command: str, config: dict, inputs: Dict[str, str],
                 artifacts: Dict[str, str], seed: Optional[int] = None):
        super().__init__(path)
        self.command = command
        self.config = config
        self.inputs = inputs
        self.artifacts = artifacts
        self.seed = seed

    def _relative(self, p: str) -> str:
        base = os.path.dirname(os.path.abspath(self.path))
        p_abs = os.path.abspath(p)
        if os.path.commonpath([base, p_abs]) == base:
            return os.path.relpath(p_abs, base)
        return os.path.basename(p)

    def payload(self) -> dict:
        return {
            'tool': 'sazig',
            'version': __version__,
            'command': self.command,
            'seed': self.seed,
            'config': self.config,
            'inputs': {name: {'file': os.path.basename(p), 'sha256': sha256_file(p)}
                       for name, p in sorted(self.inputs.items())},
            'artifacts': {name: {'file': self._relative(p), 'sha256': sha256_file(p)}
                          for name, p in sorted(self.artifacts.items())},
        }


class DiagnosticsReporter(Reporter):
    """Summary of one fit: final loss, halvings, warnings and separation flags."""

    def __init__(self, path: str, trace, state, failure: Optional[str] = None,
                 final_loss: Optional[float] = None):
        super().__init__(path)
        self.trace = trace
        self.state = state
        self.failure = failure
        self.final_loss = final_loss

    def payload(self) -> dict:
        trace = self.trace
        losses = trace.losses
        warnings = [w for r in trace.records for w in r.warnings]
        final_loss = self.final_loss if self.final_loss is not None else (losses[-1] if losses else trace.initial_loss)
        return {
            'iterations': len(trace),
            'final_iteration': self.state.iteration,
            'initial_loss': trace.initial_loss,
            'final_loss': final_loss,
            'converged': trace.converged,
            'shape': self.state.shape,
            'link': self.state.link.value,
            'total_halvings': trace.total_halvings,
            'warning_count': len(warnings),
            'warning_kinds': _count_kinds(warnings),
            'failure_signature': self.failure,
            'separation': [report.to_dict() for _, report in sorted(trace.separation.items())],
        }


def _count_kinds(warnings) -> dict:
    counts: Dict[str, int] = {}
    for w in warnings:
        kind = w.split(':', 1)[0]
        counts[kind] = counts.get(kind, 0) + 1
    return counts


class ReporterFactory:
    """Factory to create the appropriate reporter."""

    @staticmethod
    def create_reporter(kind: str, path: str, **kwargs) -> Reporter:
        if kind == 'manifest':
            return ManifestReporter(path, **kwargs)
        if kind == 'diagnostics':
            return DiagnosticsReporter(path, **kwargs)
        raise ValueError(f"Unknown reporter kind: {kind}")
