"""Named workload presets: scaling shape plus measured per-server power.

Power ratings follow the evaluated workload classes (60 W for CPU-bound
MPI solvers, 210 W for CPU+GPU training). The decay factors are
representative fixtures for the observed scaling classes: near-linear
MPI/ResNet18-style jobs, moderately diminishing trainers, and poorly
scaling VGG-style jobs.
"""

from dataclasses import dataclass
from typing import Optional

from .curves import MarginalCapacityCurve, PowerModel, synthetic_curve


@dataclass(frozen=True)
class WorkloadPreset:
    decay: float
    power_watts: Optional[float]
    note: str = ""


PRESETS: dict[str, WorkloadPreset] = {
    "demo_flat": WorkloadPreset(1.0, None, "worked example, ideal scaling"),
    "demo_diminishing": WorkloadPreset(0.7, None, "worked example, diminishing"),
    "nbody_100k": WorkloadPreset(0.98, 60.0, "large MPI solver, near-linear"),
    "nbody_10k": WorkloadPreset(0.8, 60.0, "small MPI solver, diminishing"),
    "resnet18": WorkloadPreset(0.97, 210.0, "image classifier, near-linear"),
    "resnet50": WorkloadPreset(0.85, 210.0, "deeper classifier, diminishing"),
    "efficientnet_b1": WorkloadPreset(0.9, 210.0, "image classifier, diminishing"),
    "vgg16": WorkloadPreset(0.7, 210.0, "heavyweight classifier, poor scaling"),
}


def preset_curve(name: str, m: int, M: int) -> MarginalCapacityCurve:
    preset = PRESETS[name]
    kind = "linear" if preset.decay >= 1.0 else "diminishing"
    curve = synthetic_curve(kind, m, M, decay=preset.decay)
    return MarginalCapacityCurve(m=m, M=M, values=curve.values, name=name)


def preset_power(name: str) -> Optional[PowerModel]:
    watts = PRESETS[name].power_watts
    return PowerModel(watts) if watts is not None else None
