"""Physics-stage classifier: descriptor questions to primitive kinds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from opgraph.errors import ClassificationError
from opgraph.operators import DETECT_FAMILIES, TRANSFORM_FAMILIES, Kind

READOUT_STEPS = {
    "disperse": Kind.DISPERSE, "integrate": Kind.ACCUMULATE, "subsample": Kind.SAMPLE,
    "psf": Kind.CONVOLVE, "detect": Kind.DETECT,
}


@dataclass(frozen=True)
class StageDescriptor:
    """Yes/no answers describing one physics stage.

    The optional fields refine the answer where the question table leaves a
    choice: ``shift_invariant`` picks C over P for free-space evolution,
    ``multiple_scattering`` expands R into R∘P∘R, and the two family fields
    label Λ and D nodes.
    """

    is_pointwise_nonlinear: bool = False
    is_free_space_evolution: bool = False
    interacts_with_matter: bool = False
    changes_direction_or_energy: bool = False
    maps_space_to_measurement: bool = False
    is_line_integral: bool = False
    readout_step: Optional[str] = None
    shift_invariant: bool = False
    multiple_scattering: bool = False
    transform_family: Optional[str] = None
    detect_family: Optional[int] = None
    label: str = ""


@dataclass(frozen=True)
class ClassifiedStage:
    kinds: tuple[Kind, ...]
    family: Optional[str] = None
    path: tuple[str, ...] = ()

    @property
    def symbol(self) -> str:
        return " → ".join(k.symbol for k in self.kinds)

    def detailed(self) -> str:
        if self.kinds == (Kind.TRANSFORM,) and self.family:
            return f"Λ_{self.family.split('_')[0]}"
        return self.symbol


def _conflict(d: StageDescriptor, *fields: str):
    where = f" in stage {d.label!r}" if d.label else ""
    raise ClassificationError(f"inconsistent descriptor{where}: {', '.join(fields)}")


def _check(d: StageDescriptor) -> None:
    if d.is_line_integral and not d.maps_space_to_measurement:
        _conflict(d, "is_line_integral", "maps_space_to_measurement")
    if d.changes_direction_or_energy and not d.interacts_with_matter:
        _conflict(d, "changes_direction_or_energy", "interacts_with_matter")
    if d.multiple_scattering and not d.changes_direction_or_energy:
        _conflict(d, "multiple_scattering", "changes_direction_or_energy")
    if d.shift_invariant and not d.is_free_space_evolution:
        _conflict(d, "shift_invariant", "is_free_space_evolution")
    if d.readout_step is not None and d.readout_step not in READOUT_STEPS:
        _conflict(d, "readout_step")
    if d.detect_family is not None and d.readout_step != "detect":
        _conflict(d, "detect_family", "readout_step")
    if d.transform_family is not None and not d.is_pointwise_nonlinear:
        _conflict(d, "transform_family", "is_pointwise_nonlinear")
    physics = [f for f in ("is_free_space_evolution", "interacts_with_matter", "maps_space_to_measurement")
               if getattr(d, f)]
    nonlinear = d.is_pointwise_nonlinear and d.readout_step != "detect"
    if nonlinear and (physics or d.readout_step):
        _conflict(d, "is_pointwise_nonlinear", *(physics or ["readout_step"]))
    if len(physics) > 1:
        _conflict(d, *physics)
    if physics and d.readout_step is not None:
        _conflict(d, physics[0], "readout_step")


def classify_stage(d: StageDescriptor) -> ClassifiedStage:
    """Walk Q0, Q1, Q2/Q2a, Q3/Q3a in order and return the resulting kind(s)."""
    _check(d)
    if d.is_pointwise_nonlinear and d.readout_step != "detect":
        if d.transform_family not in TRANSFORM_FAMILIES:
            raise ClassificationError(f"pointwise nonlinear stage needs a transform family, got {d.transform_family!r}")
        return ClassifiedStage((Kind.TRANSFORM,), d.transform_family, ("Q0",))
    if d.is_free_space_evolution:
        return ClassifiedStage((Kind.CONVOLVE if d.shift_invariant else Kind.PROPAGATE,), path=("Q0", "Q1"))
    if d.interacts_with_matter:
        if d.changes_direction_or_energy:
            kinds = (Kind.SCATTER, Kind.PROPAGATE, Kind.SCATTER) if d.multiple_scattering else (Kind.SCATTER,)
            return ClassifiedStage(kinds, path=("Q0", "Q1", "Q2", "Q2a"))
        return ClassifiedStage((Kind.MODULATE,), path=("Q0", "Q1", "Q2", "Q2a"))
    if d.maps_space_to_measurement:
        return ClassifiedStage((Kind.PROJECT if d.is_line_integral else Kind.ENCODE,),
                               path=("Q0", "Q1", "Q2", "Q3", "Q3a"))
    if d.readout_step is None:
        raise ClassificationError("readout stage needs readout_step "
                                  f"(one of {', '.join(READOUT_STEPS)})")
    fam = None
    if d.readout_step == "detect" and d.detect_family is not None:
        if not 1 <= d.detect_family <= 5:
            raise ClassificationError(f"detect family must be 1..5, got {d.detect_family}")
        fam = DETECT_FAMILIES[d.detect_family - 1]
    return ClassifiedStage((READOUT_STEPS[d.readout_step],), fam, ("Q0", "Q1", "Q2", "Q3"))


def compile_chain(stages: Sequence[StageDescriptor], detailed: bool = False) -> str:
    """Classify every stage and join the results into chain notation."""
    if not stages:
        raise ClassificationError("empty stage list")
    parts = [classify_stage(d) for d in stages]
    if parts[-1].kinds[-1] is not Kind.DETECT:
        raise ClassificationError("a forward model must end in a detection stage")
    return " → ".join(p.detailed() if detailed else p.symbol for p in parts)


def worked_examples() -> dict[str, list[StageDescriptor]]:
    """Stage descriptions for coded-aperture spectral imaging, MRI and polychromatic CT."""
    return {
        "cassi": [
            StageDescriptor(interacts_with_matter=True, label="coded mask"),
            StageDescriptor(readout_step="disperse", label="prism dispersion"),
            StageDescriptor(readout_step="integrate", label="spectral integration"),
            StageDescriptor(is_pointwise_nonlinear=True, readout_step="detect", detect_family=4,
                            label="photon detection"),
        ],
        "mri": [
            StageDescriptor(interacts_with_matter=True, label="coil sensitivity"),
            StageDescriptor(maps_space_to_measurement=True, label="gradient encoding"),
            StageDescriptor(readout_step="subsample", label="undersampling"),
            StageDescriptor(readout_step="detect", detect_family=1, label="RF readout"),
        ],
        "beam_hardening_ct": [
            StageDescriptor(maps_space_to_measurement=True, is_line_integral=True, label="line integrals"),
            StageDescriptor(is_pointwise_nonlinear=True, transform_family="exp_atten", label="Beer-Lambert"),
            StageDescriptor(readout_step="integrate", label="energy integration"),
            StageDescriptor(is_pointwise_nonlinear=True, transform_family="log", label="log transform"),
            StageDescriptor(is_pointwise_nonlinear=True, readout_step="detect", detect_family=4,
                            label="photon counting"),
        ],
    }
