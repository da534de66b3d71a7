"""Hardware model: system parameters, Hamiltonians and dissipation channels.

Frequencies are plain Hz and times are seconds everywhere in the public
interface; the single conversion to angular units happens when a
Hamiltonian matrix is assembled.  All operators live in the joint
ancilla-cavity space with the ancilla-major ordering from `hilbert`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .hilbert import AncillaBasis, CavityBasis, lift_ancilla, lift_cavity

__all__ = [
    "CollapseChannel",
    "DriveSpec",
    "ERROR_OPERATOR_NAMES",
    "HamiltonianSpec",
    "SystemParams",
    "build_hamiltonian",
    "cancellation_detuning",
    "collapse_channels",
    "error_operator",
    "induced_chi",
]

TWO_PI = 2.0 * math.pi

_ANCILLA = AncillaBasis()

_DEFAULT_ASSIGNMENT = (
    (0.9996, 0.0004, 0.0),
    (0.0001, 0.9997, 0.0002),
    (0.0, 0.0001, 0.9999),
)


@dataclass(frozen=True)
class SystemParams:
    """Dispersive shifts, coherence times and readout model of the device.

    ``chi_e``, ``chi_f`` and ``chi_h`` are the cavity frequency pulls (Hz)
    with the ancilla in e, f and h; the g-level pull defines the rotating
    frame and is zero by convention.  ``assignment_error`` is the
    row-stochastic confusion matrix P(reported | true) over (g, e, f).
    ``drive_dephasing_factor`` scales every ancilla dephasing rate while
    the sideband drive is on.
    """

    chi_e: float = -93.0e3
    chi_f: float = -236.0e3
    chi_h: float = -515.0e3
    kerr: float = -10.0
    T1_cavity: float = 1.07e-3
    T1_eg: float = 25.0e-6
    T1_fe: float = 23.0e-6
    Tphi_g: float = 81.0e-6
    Tphi_e: float = 17.0e-6
    Tphi_f: float = 12.0e-6
    n_th: float = 0.025
    omega_sb: float = 1.7e6
    t_ro: float = 1.2e-6
    drive_dephasing_factor: float = 1.15
    assignment_error: tuple = _DEFAULT_ASSIGNMENT

    def __post_init__(self):
        for name in ("T1_cavity", "T1_eg", "T1_fe", "Tphi_g", "Tphi_e", "Tphi_f",
                     "omega_sb", "t_ro", "drive_dephasing_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")
        matrix = tuple(tuple(float(x) for x in row) for row in self.assignment_error)
        object.__setattr__(self, "assignment_error", matrix)
        if len(matrix) != 3 or any(len(row) != 3 for row in matrix):
            raise ValueError("assignment_error must be a 3x3 matrix over (g, e, f)")
        for row in matrix:
            if any(x < 0 for x in row):
                raise ValueError("assignment_error entries must be non-negative")
            if abs(sum(row) - 1.0) > 1e-12:
                raise ValueError("assignment_error rows must sum to 1 within 1e-12")

    @classmethod
    def from_mapping(cls, raw: dict) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown parameter(s): {', '.join(unknown)}")
        kwargs = dict(raw)
        if "assignment_error" in kwargs:
            kwargs["assignment_error"] = tuple(
                tuple(float(x) for x in row) for row in kwargs["assignment_error"]
            )
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "SystemParams":
        """Load parameters from a flat JSON object; unknown keys are errors."""
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("parameter file must contain a JSON object")
        return cls.from_mapping(raw)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "assignment_error":
                value = [list(row) for row in value]
            out[f.name] = value
        return out


@dataclass(frozen=True)
class DriveSpec:
    """Sideband drive amplitude and detuning, both in Hz."""

    omega: float
    detuning: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("drive amplitude must be positive")


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Static Hamiltonian matrix plus optional periodic drive terms.

    ``periodic`` entries are ``(op, freq_hz)`` pairs; the full generator is
    ``static + sum(op * exp(2j pi f t) + op.conj().T * exp(-2j pi f t))``.
    Matrix entries are angular frequencies (rad/s).
    """

    static: np.ndarray
    periodic: tuple = ()

    @property
    def is_static(self) -> bool:
        return len(self.periodic) == 0

    @property
    def static_diagonal(self):
        """Diagonal of the static part, or None if it has off-diagonal terms."""
        cached = getattr(self, "_static_diag", False)
        if cached is False:
            diag = np.diagonal(self.static)
            if np.count_nonzero(self.static - np.diag(diag)):
                cached = None
            else:
                cached = diag.copy()
            object.__setattr__(self, "_static_diag", cached)
        return cached

    def matrix(self, t: float) -> np.ndarray:
        h = np.array(self.static, dtype=complex)
        for op, freq in self.periodic:
            phase = np.exp(2j * math.pi * freq * t)
            h += op * phase + op.conj().T * np.conjugate(phase)
        return h


def induced_chi(omega: float, delta: float, n: int = 1) -> float:
    """Exact drive-induced shift (Hz) of |e, n> from the sideband coupling.

    The sideband couples |e, n> to |h, n-1> with matrix element
    ``sqrt(n) omega / 2`` at detuning ``delta``; the returned value is the
    dressed-state displacement of the e level, which reduces to the
    familiar ``n omega**2 / (4 delta)`` when ``|delta| >> omega``.
    """
    if delta == 0.0:
        raise ValueError("induced shift is undefined at zero detuning")
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if n == 0:
        return 0.0
    return math.copysign(0.5, delta) * (
        math.sqrt(delta * delta + n * omega * omega) - abs(delta)
    )


def cancellation_detuning(params: SystemParams, target: str) -> float:
    """Drive detuning that tunes the dressed e-level shift to a target.

    ``zero_chi_eg`` nulls the total e-g dispersive shift; ``zero_chi_fe``
    matches the e-level pull to the f-level pull so that an e-f swap no
    longer changes the cavity frequency.  Solves the exact single-photon
    expression in closed form.
    """
    if target == "zero_chi_eg":
        goal = -params.chi_e
    elif target == "zero_chi_fe":
        goal = params.chi_f - params.chi_e
    else:
        raise ValueError(f"unknown cancellation target {target!r}")
    omega = params.omega_sb
    if omega <= 2.0 * abs(goal):
        raise ValueError("drive too weak to reach the requested shift")
    magnitude = (omega * omega - 4.0 * goal * goal) / (4.0 * abs(goal))
    return math.copysign(magnitude, goal)


def build_hamiltonian(
    params: SystemParams,
    basis: CavityBasis = CavityBasis(),
    mode: str = "off",
    drive: DriveSpec | None = None,
    ft_mode: bool = False,
) -> HamiltonianSpec:
    """Assemble the joint Hamiltonian in the g-level rotating frame.

    ``mode`` selects how the sideband drive enters: ``"off"`` (no drive),
    ``"effective"`` (drive folded into static dressed shifts) or
    ``"time_dependent"`` (explicit oscillating coupling to the h level).
    ``ft_mode`` substitutes the f-level pull for the e-level pull, the
    error-transparent limit in which an e-f swap commutes with the
    dispersive evolution.
    """
    if mode not in ("off", "effective", "time_dependent"):
        raise ValueError(f"unknown Hamiltonian mode {mode!r}")
    n = np.arange(basis.dim, dtype=float)
    kerr_part = 0.5 * params.kerr * n * (n - 1.0)
    chi_e = params.chi_f if ft_mode else params.chi_e
    pulls = (0.0, chi_e, params.chi_f, params.chi_h)
    diag = np.concatenate([pull * n + kerr_part for pull in pulls])

    periodic = ()
    if mode == "effective":
        if drive is None:
            raise ValueError("effective mode requires a drive specification")
        if abs(drive.detuning) < drive.omega:
            raise ValueError(
                "effective mode needs |detuning| >= drive amplitude; "
                "use time_dependent mode closer to resonance"
            )
        shift = induced_chi(drive.omega, drive.detuning, 1)
        dim = basis.dim
        diag[dim : 2 * dim] += shift * n
        diag[3 * dim : 4 * dim] += -shift * (n + 1.0)
    elif mode == "time_dependent":
        if drive is None:
            raise ValueError("time_dependent mode requires a drive specification")
        coupling = TWO_PI * 0.5 * drive.omega * np.kron(
            _ANCILLA.transition("e", "h"), basis.creation()
        )
        periodic = ((coupling, drive.detuning),)

    return HamiltonianSpec(static=np.diag(TWO_PI * diag).astype(complex), periodic=periodic)


@dataclass(frozen=True, eq=False)
class CollapseChannel:
    """Jump operator with its rate folded in: operator = sqrt(rate) * L.

    ``product_diag`` caches the diagonal of L+L (rate included) when that
    product is exactly diagonal, which the trajectory fast path relies on.
    """

    label: str
    operator: np.ndarray
    rate: float

    def __post_init__(self):
        product = self.operator.conj().T @ self.operator
        diag = np.diagonal(product)
        cached = None if np.count_nonzero(product - np.diag(diag)) else diag.real.copy()
        object.__setattr__(self, "product_diag", cached)


def collapse_channels(
    params: SystemParams,
    basis: CavityBasis = CavityBasis(),
    drive_on: bool = False,
) -> tuple:
    """All dissipation channels of the joint system.

    Ancilla dephasing enters as ``sqrt(2 / Tphi) |i><i|`` so that the
    coherence between levels i and j decays at ``1/Tphi_i + 1/Tphi_j``.
    ``drive_on`` multiplies every dephasing rate by the drive penalty
    factor.  Thermal excitation feeds g to e and, with the ladder scaling,
    f to h.
    """
    dim = basis.dim
    deph_scale = params.drive_dephasing_factor if drive_on else 1.0

    def anc(op):
        return lift_ancilla(op, dim)

    channels = [
        ("cavity_loss", 1.0 / params.T1_cavity, lift_cavity(basis.annihilation())),
        ("relax_eg", 1.0 / params.T1_eg, anc(_ANCILLA.transition("g", "e"))),
        ("relax_fe", 1.0 / params.T1_fe, anc(_ANCILLA.transition("e", "f"))),
        ("dephase_g", deph_scale * 2.0 / params.Tphi_g, anc(_ANCILLA.projector("g"))),
        ("dephase_e", deph_scale * 2.0 / params.Tphi_e, anc(_ANCILLA.projector("e"))),
        ("dephase_f", deph_scale * 2.0 / params.Tphi_f, anc(_ANCILLA.projector("f"))),
        ("thermal_ge", params.n_th / params.T1_eg, anc(_ANCILLA.transition("e", "g"))),
        ("thermal_fh", 3.0 * params.n_th / params.T1_eg, anc(_ANCILLA.transition("h", "f"))),
    ]
    return tuple(
        CollapseChannel(label, math.sqrt(rate) * op, rate)
        for label, rate, op in channels
        if rate > 0.0
    )


ERROR_OPERATOR_NAMES = (
    "cavity_loss",
    "relax_eg",
    "relax_fe",
    "thermal_ge",
    "thermal_fh",
    "flip_ge",
    "flip_gf",
)


def error_operator(name: str, basis: CavityBasis = CavityBasis()) -> np.ndarray:
    """Unnormalized jump or flip operator for deterministic error injection.

    ``flip_ge`` and ``flip_gf`` are ancilla phase flips (a dephasing event
    on the g-e or g-f superposition); the rest are the jump operators of
    the matching dissipation channels.
    """
    dim = basis.dim
    if name == "cavity_loss":
        return lift_cavity(basis.annihilation())
    if name == "relax_eg":
        return lift_ancilla(_ANCILLA.transition("g", "e"), dim)
    if name == "relax_fe":
        return lift_ancilla(_ANCILLA.transition("e", "f"), dim)
    if name == "thermal_ge":
        return lift_ancilla(_ANCILLA.transition("e", "g"), dim)
    if name == "thermal_fh":
        return lift_ancilla(_ANCILLA.transition("h", "f"), dim)
    if name == "flip_ge":
        return lift_ancilla(np.diag([1.0, -1.0, 1.0, 1.0]).astype(complex), dim)
    if name == "flip_gf":
        return lift_ancilla(np.diag([1.0, 1.0, -1.0, 1.0]).astype(complex), dim)
    raise KeyError(f"unknown error operator {name!r}")
