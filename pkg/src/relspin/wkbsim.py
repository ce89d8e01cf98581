"""WKB-limit simulation of a Stern-Gerlach measurement.

An incoming spinor is split into the +-1 eigenstates of the Stern-Gerlach
operator. Each branch then follows its own ray

    dx/dtau = k/m
    dk/dtau = (e/m) F^ab k_b - s c (mu/m) d^a |B_RF|

where ``s`` is the branch sign and ``c`` the sign convention (+1 by default).
The spinor amplitude is carried along the ray by

    2 m dphi/dtau = -(d_a k^a) phi - i mu F_ab L^ab phi.

The field is a pure magnetic field in the device frame with a fixed direction
and a magnitude that grows linearly along the gradient direction, confined to
a slab with cubic-ramp edges. Geometry is stored as four-vectors, so a
profile can be boosted as a whole and the simulation stays covariant.

``|B_RF|`` is evaluated in the rest frame of the packet's incoming velocity
(the velocity both branches share before the field). With that choice
``k.k + 2 s c mu |B_RF|`` is an exact invariant of the ray equations.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import lorentz
from .errors import DomainError, IntegrationError
from .lorentz import GENERATORS, LEVI_CIVITA, METRIC, dot, lower
from .observable import SGConfig, rest_frame_factor, sg_field_tensor, sg_operator
from .spinor import Spinor, eigenstates, inner_product, normalized

DEFAULT_DTAU = 1e-3
DEFAULT_MAX_STEPS = 10_000_000
TRAJECTORY_HEADER = ["branch", "tau", "t", "x", "y", "z", "kt", "kx", "ky", "kz", "Bmag"]


def _ramp(t: float) -> tuple[float, float]:
    """Cubic smoothstep on [0, 1] and its derivative."""
    if t <= 0.0:
        return 0.0, 0.0
    if t >= 1.0:
        return 1.0, 0.0
    return t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)


def _unit_spacelike_orthogonal(vec, v) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    vec = vec - dot(vec, v) * np.asarray(v)
    size2 = -dot(vec, vec)
    if size2 <= 1e-24:
        raise DomainError("direction has no component orthogonal to the device velocity")
    return vec / math.sqrt(size2)


@dataclass(frozen=True)
class FieldProfile:
    """Inhomogeneous Stern-Gerlach field confined to a slab.

    In the device frame the magnitude at position ``X`` is
    ``max(0, |B| + G (X - X0).g)`` times ramp windows along the beam axis and
    across it. ``slab`` bounds the full-strength region along the beam axis;
    the field ramps to zero over ``edge_width`` outside it. ``half_width``
    bounds the transverse distance from the beam line the same way.

    ``charge`` drives the Lorentz force, ``coupling`` (default: ``charge``)
    drives the gradient force and spin precession.
    """

    config: SGConfig
    gradient: float
    gradient_direction: np.ndarray
    beam_axis: np.ndarray
    origin: np.ndarray
    slab: tuple[float, float] = (0.0, 1.0)
    edge_width: float = 0.1
    half_width: float = math.inf
    charge: float = 1.0
    coupling: float | None = None
    sign_convention: int = 1

    def __post_init__(self):
        v = self.config.device_velocity
        a = _unit_spacelike_orthogonal(self.beam_axis, v)
        g = _unit_spacelike_orthogonal(self.gradient_direction, v)
        x0 = np.array(self.origin, dtype=float).reshape(4)
        s0, s1 = (float(s) for s in self.slab)
        if not s1 > s0:
            raise DomainError("slab must have positive length")
        if not self.edge_width > 0:
            raise DomainError("edge_width must be positive")
        if not self.half_width > 0:
            raise DomainError("half_width must be positive")
        if self.sign_convention not in (1, -1):
            raise DomainError("sign_convention must be +1 or -1")
        for arr in (a, g, x0):
            arr.setflags(write=False)
        object.__setattr__(self, "beam_axis", a)
        object.__setattr__(self, "gradient_direction", g)
        object.__setattr__(self, "origin", x0)
        object.__setattr__(self, "slab", (s0, s1))
        # cached constants for the integrator
        unit = replace(self.config, field_magnitude=1.0)
        f_unit = sg_field_tensor(unit)
        object.__setattr__(self, "_f_mixed", METRIC @ f_unit)
        object.__setattr__(self, "_f_dot_l", np.einsum("ab,abij->ij", f_unit, GENERATORS))
        object.__setattr__(self, "_a_low", lower(a))
        object.__setattr__(self, "_g_low", lower(g))
        object.__setattr__(self, "_v_low", lower(v))
        object.__setattr__(self, "_basis", self._transverse_basis())

    @classmethod
    def from_device_frame(
        cls,
        field_magnitude: float,
        field_direction=(0.0, 0.0, 1.0),
        gradient: float = 0.0,
        gradient_direction=(0.0, 0.0, 1.0),
        beam_axis=(1.0, 0.0, 0.0),
        slab=(0.0, 1.0),
        device_beta=(0.0, 0.0, 0.0),
        origin=(0.0, 0.0, 0.0),
        **kwargs,
    ) -> "FieldProfile":
        """Build a profile from 3-vectors measured in the device rest frame."""
        cfg = SGConfig.from_device_frame(field_direction, field_magnitude, device_beta)
        frame = lorentz.boost_from_beta(device_beta)

        def lift(vec3):
            return frame.vector @ np.concatenate([[0.0], np.asarray(vec3, dtype=float)])

        return cls(
            config=cfg,
            gradient=gradient,
            gradient_direction=lift(gradient_direction),
            beam_axis=lift(beam_axis),
            origin=lift(origin),
            slab=slab,
            **kwargs,
        )

    @property
    def mu(self) -> float:
        return self.charge if self.coupling is None else float(self.coupling)

    def transformed(self, t: lorentz.LorentzPair) -> "FieldProfile":
        return replace(
            self,
            config=self.config.transformed(t),
            gradient_direction=t.vector @ self.gradient_direction,
            beam_axis=t.vector @ self.beam_axis,
            origin=t.vector @ self.origin,
        )

    def _transverse_basis(self) -> np.ndarray:
        """Orthonormal device-frame triad (beam, gradient-ish, binormal) as four-vectors."""
        v, a = self.config.device_velocity, self.beam_axis
        second = None
        for cand in (self.gradient_direction, self.config.field_direction, *np.eye(4)[1:]):
            w = np.asarray(cand, dtype=float) - dot(cand, v) * v + dot(cand, a) * a
            if -dot(w, w) > 1e-12:
                second = w / math.sqrt(-dot(w, w))
                break
        third = np.einsum("abcd,b,c,d->a", LEVI_CIVITA, lower(v), lower(a), lower(second))
        third /= math.sqrt(-dot(third, third))
        return np.array([a, second, third])

    def device_coordinates(self, x) -> np.ndarray:
        """Device time, beam coordinate and the two transverse coordinates of event ``x``."""
        d = np.asarray(x, dtype=float) - self.origin
        v = self.config.device_velocity
        return np.array([dot(d, v), *(-dot(d, e) for e in self._basis)])

    def magnitude_and_gradient(self, x) -> tuple[float, np.ndarray]:
        """Device-frame ``|B|`` at event ``x`` and its covariant gradient ``d_b |B|``."""
        d = np.asarray(x, dtype=float) - self.origin
        s = -float(d @ self._a_low)
        gz = -float(d @ self._g_low)
        s0, s1 = self.slab
        w = self.edge_width
        if s < s0:
            ws, dws = _ramp((s - (s0 - w)) / w)
        else:
            ws, dws = _ramp(((s1 + w) - s) / w)
            dws = -dws
        dws /= w
        base = self.config.field_magnitude + self.gradient * gz
        if base <= 0.0 or ws == 0.0:
            return 0.0, np.zeros(4)
        grad = -dws * base * self._a_low - ws * self.gradient * self._g_low
        mag = ws * base
        if math.isfinite(self.half_width):
            v = self.config.device_velocity
            trans = d - (d @ self._v_low) * v - s * self.beam_axis
            r = math.sqrt(max(-dot(trans, trans), 0.0))
            wr, dwr = _ramp(((self.half_width + w) - r) / w)
            if wr == 0.0:
                return 0.0, np.zeros(4)
            grad = grad * wr
            if dwr != 0.0 and r > 0.0:
                # d r / d x^b = -t_b / r and the ramp runs backwards in r
                grad = grad + mag * (dwr / w) * (lower(trans) / r)
            mag *= wr
        return mag, grad

    def magnitude(self, x) -> float:
        return self.magnitude_and_gradient(x)[0]

    def kink_values(self, x) -> np.ndarray:
        """Signed functions of ``x`` whose zeros are the surfaces where the field is not smooth."""
        d = np.asarray(x, dtype=float) - self.origin
        s = -float(d @ self._a_low)
        s0, s1 = self.slab
        w = self.edge_width
        vals = [s - (s0 - w), s - s0, s - s1, s - (s1 + w)]
        if self.gradient != 0.0:
            vals.append(self.config.field_magnitude - self.gradient * float(d @ self._g_low))
        if math.isfinite(self.half_width):
            v = self.config.device_velocity
            trans = d - (d @ self._v_low) * v - s * self.beam_axis
            r = math.sqrt(max(-dot(trans, trans), 0.0))
            vals += [r - self.half_width, r - (self.half_width + w)]
        return np.array(vals)

    def maxwell_violation(self) -> dict:
        """Divergence and curl of the model field at the slab centre (device frame).

        The field ``|B|(X) b`` is not source-free unless the gradient is zero;
        this reports by how much.
        """
        centre_s = 0.5 * sum(self.slab)
        x = self.origin + centre_s * self.beam_axis
        _, grad = self.magnitude_and_gradient(x)
        frame = self.config.device_frame()
        grad3 = -(frame.vector.T @ grad)[1:]  # spatial gradient d_i |B| in the device frame
        b3 = self.config.device_frame_direction()
        return {
            "divergence": float(abs(grad3 @ b3)),
            "curl": float(np.linalg.norm(np.cross(grad3, b3))),
        }


@dataclass(frozen=True)
class WKBPacket:
    """One branch of the split packet at a point on its ray.

    ``amplitude`` is the transported spinor (labelled by the current
    wavevector); ``weight`` is the branch coefficient fixed at the split.
    """

    branch: int
    position: np.ndarray
    wavevector: np.ndarray
    amplitude: Spinor
    weight: complex
    mass: float
    reference_velocity: np.ndarray
    tau: float = 0.0

    @property
    def probability(self) -> float:
        return abs(self.weight) ** 2


@dataclass
class _Ray:
    """Mutable integration state; kept internal for speed."""

    x: np.ndarray
    k: np.ndarray
    phi: np.ndarray | None
    tau: float


_KINK_TOL = 1e-13
_MAX_SPLITS = 16


class _Dynamics:
    def __init__(self, profile: FieldProfile, mass: float, branch: int, reference_velocity):
        self.profile = profile
        self.m = mass
        self.e_over_m = profile.charge / mass
        self.mu_over_m = profile.mu / mass
        self.kick = profile.sign_convention * branch * self.mu_over_m * rest_frame_factor(
            profile.config, reference_velocity
        )
        self.factor = rest_frame_factor(profile.config, reference_velocity)
        self.f_mixed = profile._f_mixed
        self.f_dot_l = profile._f_dot_l

    def rates(self, x, k, phi, divergence=0.0):
        mag, grad = self.profile.magnitude_and_gradient(x)
        dx = k / self.m
        dk = self.e_over_m * mag * (self.f_mixed @ k)
        if self.kick != 0.0:
            dk = dk - self.kick * (METRIC @ grad)
        if phi is None:
            return dx, dk, None
        dphi = (-0.5j * self.mu_over_m * mag) * (self.f_dot_l @ phi)
        if divergence:
            dphi = dphi - (0.5 * divergence / self.m) * phi
        return dx, dk, dphi

    def step(self, ray: _Ray, dtau: float, divergence=0.0) -> _Ray:
        """RK4 step of length ``dtau`` split wherever the field stops being smooth.

        The ramp ends and the clip surface are kinks of the field; stepping
        across one costs RK4 its order, so the step is cut exactly there.
        """
        start_tau = ray.tau
        remaining = dtau
        for _ in range(_MAX_SPLITS):
            trial = self.rk4(ray, remaining, divergence)
            g0 = self.profile.kink_values(ray.x)
            g1 = self.profile.kink_values(trial.x)
            crossed = (np.abs(g0) > _KINK_TOL) & (np.sign(g0) != np.sign(g1))
            if not crossed.any():
                break
            frac = min(self._crossing(ray, remaining, i, g0[i], g1[i], divergence) for i in np.flatnonzero(crossed))
            ray = self.rk4(ray, frac * remaining, divergence)
            remaining -= frac * remaining
        else:
            trial = self.rk4(ray, remaining, divergence)
        trial.tau = start_tau + dtau
        return trial

    def _crossing(self, ray: _Ray, h: float, index: int, g_lo: float, g_hi: float, divergence) -> float:
        """Fraction of the step at which kink function ``index`` vanishes (regula falsi)."""
        lo, hi = 0.0, 1.0
        frac = lo + g_lo * (hi - lo) / (g_lo - g_hi)
        for _ in range(8):
            g = self.profile.kink_values(self.rk4(ray, frac * h, divergence).x)[index]
            if abs(g) <= _KINK_TOL:
                break
            if np.sign(g) == np.sign(g_lo):
                lo, g_lo = frac, g
            else:
                hi, g_hi = frac, g
            frac = lo + g_lo * (hi - lo) / (g_lo - g_hi)
        return frac

    def rk4(self, ray: _Ray, dtau: float, divergence=0.0) -> _Ray:
        x, k, phi = ray.x, ray.k, ray.phi
        h = dtau
        k1 = self.rates(x, k, phi, divergence)
        k2 = self.rates(*_advance(x, k, phi, k1, 0.5 * h), divergence)
        k3 = self.rates(*_advance(x, k, phi, k2, 0.5 * h), divergence)
        k4 = self.rates(*_advance(x, k, phi, k3, h), divergence)
        nx = x + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        nk = k + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        nphi = None
        if phi is not None:
            nphi = phi + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        _check_sane(nx, nk, nphi, self.m)
        return _Ray(nx, nk, nphi, ray.tau + h)

    def invariant(self, x, k) -> float:
        """``k.k + 2 s c mu |B_RF|``, constant along exact rays."""
        return dot(k, k) + 2.0 * self.kick * self.m * self.profile.magnitude(x)


def _advance(x, k, phi, rates, h):
    nphi = None if phi is None else phi + h * rates[2]
    return x + h * rates[0], k + h * rates[1], nphi


def _check_sane(x, k, phi, m):
    bad = not (np.all(np.isfinite(x)) and np.all(np.isfinite(k)))
    if phi is not None and not np.all(np.isfinite(phi)):
        bad = True
    if bad or abs(k[0]) > 1e12 * m:
        raise IntegrationError("ray left numerical sanity bounds")
    if dot(k, k) <= 0.0:
        raise IntegrationError("wavevector stopped being timelike")


def _packet_to_ray(pkt: WKBPacket, with_spin: bool) -> _Ray:
    phi = np.array(pkt.amplitude.amplitude) if with_spin else None
    return _Ray(np.array(pkt.position), np.array(pkt.wavevector), phi, pkt.tau)


def _ray_to_packet(pkt: WKBPacket, ray: _Ray) -> WKBPacket:
    amp = pkt.amplitude.amplitude if ray.phi is None else ray.phi
    return replace(
        pkt,
        position=ray.x,
        wavevector=ray.k,
        amplitude=Spinor(amp, ray.k),
        tau=ray.tau,
    )


def split(psi: Spinor, cfg: SGConfig, position=(0.0, 0.0, 0.0, 0.0)) -> tuple[WKBPacket, WKBPacket]:
    """Decompose ``psi`` into the eigenbasis of the Stern-Gerlach operator.

    Returns the ``+`` and ``-`` packets with weights ``a = <psi+|psi>`` and
    ``b = <psi-|psi>``; both start at ``position`` with ``k = p``.
    """
    psi = normalized(psi)
    p, m = psi.momentum, psi.mass
    plus, minus = eigenstates(sg_operator(cfg, p, m))
    x = np.asarray(position, dtype=float)
    u = psi.velocity
    return tuple(
        WKBPacket(
            branch=sign,
            position=x.copy(),
            wavevector=p.copy(),
            amplitude=state,
            weight=inner_product(state, psi),
            mass=m,
            reference_velocity=u.copy(),
        )
        for sign, state in ((1, plus), (-1, minus))
    )


def _validate_step(dtau: float) -> None:
    if not dtau > 0:
        raise DomainError("dtau must be positive")


def step_trajectory(pkt: WKBPacket, profile: FieldProfile, dtau: float) -> WKBPacket:
    """One RK4 step of the branch ray; the spinor amplitude is left untouched."""
    _validate_step(dtau)
    dyn = _Dynamics(profile, pkt.mass, pkt.branch, pkt.reference_velocity)
    return _ray_to_packet(pkt, dyn.step(_packet_to_ray(pkt, False), dtau))


def transport_spin(pkt: WKBPacket, profile: FieldProfile, dtau: float, divergence: float = 0.0) -> WKBPacket:
    """One RK4 step of the ray together with the spinor carried along it.

    ``divergence`` is ``d_a k^a``; the single-ray mode leaves it at zero.
    """
    _validate_step(dtau)
    dyn = _Dynamics(profile, pkt.mass, pkt.branch, pkt.reference_velocity)
    return _ray_to_packet(pkt, dyn.step(_packet_to_ray(pkt, True), dtau, divergence))


def conserved_quantity(pkt: WKBPacket, profile: FieldProfile) -> float:
    """``k.k + 2 s c mu |B_RF|`` for the packet's current state."""
    dyn = _Dynamics(profile, pkt.mass, pkt.branch, pkt.reference_velocity)
    return dyn.invariant(pkt.position, pkt.wavevector)


def rest_frame_field(pkt: WKBPacket, profile: FieldProfile) -> float:
    """``|B_RF|`` at the packet position, in its reference rest frame."""
    return profile.magnitude(pkt.position) * rest_frame_factor(profile.config, pkt.reference_velocity)


def integrate(
    pkt: WKBPacket,
    profile: FieldProfile,
    dtau: float,
    steps: int,
    with_spin: bool = True,
) -> WKBPacket:
    """Advance a packet by ``steps`` fixed RK4 steps."""
    _validate_step(dtau)
    dyn = _Dynamics(profile, pkt.mass, pkt.branch, pkt.reference_velocity)
    ray = _packet_to_ray(pkt, with_spin)
    for _ in range(int(steps)):
        ray = dyn.step(ray, dtau)
    return _ray_to_packet(pkt, ray)


# -- ray bundles --------------------------------------------------------------


@dataclass
class RayBundle:
    """A central ray plus six neighbours displaced along the device-frame axes.

    The neighbours only carry ``(x, k)``; they provide the finite differences
    for ``d_a k^a`` on the central ray.
    """

    centre: WKBPacket
    neighbours: list
    history: list = field(default_factory=list)


def make_bundle(pkt: WKBPacket, profile: FieldProfile, spacing: float = 1e-3, spread: float = 0.0) -> RayBundle:
    """Surround ``pkt`` with six rays at distance ``spacing``.

    ``spread`` adds a radial velocity gradient: each neighbour's spatial
    wavevector is shifted by ``spread * m * offset`` in the device frame.
    """
    neighbours = []
    for axis in profile._basis:
        for sgn in (1.0, -1.0):
            offset = sgn * spacing * axis
            k = pkt.wavevector + spread * pkt.mass * offset
            # restore the mass shell of the centre ray
            k = _on_shell(k, dot(pkt.wavevector, pkt.wavevector), profile.config.device_velocity)
            neighbours.append(replace(pkt, position=pkt.position + offset, wavevector=k))
    return RayBundle(pkt, neighbours)


def _on_shell(k, target, v):
    """Adjust the device-frame energy component of ``k`` so that ``k.k = target``."""
    kv = dot(k, v)
    perp2 = kv * kv - dot(k, k)
    energy = math.sqrt(target + perp2)
    return k + (energy - kv) * np.asarray(v)


def _divergence(xs, ks, dk_centre, m) -> float:
    """Least-squares ``d_a k^a`` from ray positions/wavevectors; index 0 is the centre."""
    rows_x = list(xs[1:] - xs[0]) + [ks[0] / m]
    rows_k = list(ks[1:] - ks[0]) + [dk_centre]
    # solve J dx = dk for the Jacobian d k^a / d x^b
    jac_t, *_ = np.linalg.lstsq(np.array(rows_x), np.array(rows_k), rcond=None)
    return float(np.trace(jac_t))


def bundle_divergence(bundle: RayBundle, profile: FieldProfile) -> float:
    """Least-squares estimate of ``d_a k^a`` on the central ray."""
    c = bundle.centre
    dyn = _Dynamics(profile, c.mass, c.branch, c.reference_velocity)
    _, dk, _ = dyn.rates(c.position, c.wavevector, None)
    xs = np.array([c.position] + [n.position for n in bundle.neighbours])
    ks = np.array([c.wavevector] + [n.wavevector for n in bundle.neighbours])
    return _divergence(xs, ks, dk, c.mass)


def bundle_volume(bundle: RayBundle) -> float:
    """Rest-space volume spanned by the half-differences of opposite neighbours."""
    c = bundle.centre
    u = c.wavevector / math.sqrt(dot(c.wavevector, c.wavevector))
    legs = []
    for i in range(0, 6, 2):
        d = 0.5 * (bundle.neighbours[i].position - bundle.neighbours[i + 1].position)
        legs.append(d - dot(d, u) * u)
    gram = np.array([[-dot(a, b) for b in legs] for a in legs])
    return float(math.sqrt(abs(np.linalg.det(gram))))


def bundle_flux(bundle: RayBundle) -> float:
    """``<phi|phi> * volume``; conserved in field-free transport."""
    amp = bundle.centre.amplitude
    return float(inner_product(amp, amp).real) * bundle_volume(bundle)


def transport_bundle(bundle: RayBundle, profile: FieldProfile, dtau: float) -> RayBundle:
    """Advance every ray one joint RK4 step.

    The central spinor is transported with the divergence term, re-estimated
    from the neighbours at every stage.
    """
    _validate_step(dtau)
    c = bundle.centre
    dyn = _Dynamics(profile, c.mass, c.branch, c.reference_velocity)
    rays = [c] + list(bundle.neighbours)
    xs = np.array([r.position for r in rays])
    ks = np.array([r.wavevector for r in rays])
    phi = np.array(c.amplitude.amplitude)

    def rates(xs, ks, phi):
        dxs = np.empty_like(xs)
        dks = np.empty_like(ks)
        for i in range(len(xs)):
            dxs[i], dks[i], _ = dyn.rates(xs[i], ks[i], None)
        div = _divergence(xs, ks, dks[0], c.mass)
        _, _, dphi = dyn.rates(xs[0], ks[0], phi, div)
        return dxs, dks, dphi, div

    h = dtau
    r1 = rates(xs, ks, phi)
    r2 = rates(xs + 0.5 * h * r1[0], ks + 0.5 * h * r1[1], phi + 0.5 * h * r1[2])
    r3 = rates(xs + 0.5 * h * r2[0], ks + 0.5 * h * r2[1], phi + 0.5 * h * r2[2])
    r4 = rates(xs + h * r3[0], ks + h * r3[1], phi + h * r3[2])
    new = [
        state + (h / 6.0) * (r1[i] + 2 * r2[i] + 2 * r3[i] + r4[i])
        for i, state in enumerate((xs, ks, phi))
    ]
    for x, k in zip(new[0], new[1]):
        _check_sane(x, k, None, c.mass)
    tau = c.tau + h
    centre = replace(c, position=new[0][0], wavevector=new[1][0], amplitude=Spinor(new[2], new[1][0]), tau=tau)
    neighbours = [
        replace(n, position=x, wavevector=k, amplitude=Spinor(n.amplitude.amplitude, k), tau=tau)
        for n, x, k in zip(bundle.neighbours, new[0][1:], new[1][1:])
    ]
    return RayBundle(centre, neighbours, bundle.history + [r1[3]])


# -- full measurement ---------------------------------------------------------


@dataclass(frozen=True)
class BranchOutcome:
    branch: int
    weight: float
    amplitude: complex
    arrival: np.ndarray
    arrival_wavevector: np.ndarray
    transverse: np.ndarray
    deflection: np.ndarray
    tau: float
    steps: int
    final_state: Spinor
    samples: list

    def as_dict(self) -> dict:
        return {
            "branch": self.branch,
            "weight": self.weight,
            "amplitude": [self.amplitude.real, self.amplitude.imag],
            "arrival": self.arrival.tolist(),
            "arrival_wavevector": self.arrival_wavevector.tolist(),
            "transverse": self.transverse.tolist(),
            "deflection": self.deflection.tolist(),
            "tau": self.tau,
            "steps": self.steps,
        }


@dataclass(frozen=True)
class MeasurementOutcomeReport:
    plus: BranchOutcome
    minus: BranchOutcome
    reference_transverse: np.ndarray
    separation: float
    packet_width: float
    resolved: bool
    maxwell_violation: dict

    @property
    def branches(self) -> tuple[BranchOutcome, BranchOutcome]:
        return self.plus, self.minus

    def as_dict(self) -> dict:
        return {
            "branches": [self.plus.as_dict(), self.minus.as_dict()],
            "weights": [self.plus.weight, self.minus.weight],
            "reference_transverse": self.reference_transverse.tolist(),
            "separation": self.separation,
            "packet_width": self.packet_width,
            "resolved": self.resolved,
            "maxwell_violation": dict(self.maxwell_violation),
            "transverse_axes": ["gradient", "binormal"],
        }


def _sample_row(branch, ray: _Ray, dyn: _Dynamics) -> list:
    b_rf = dyn.profile.magnitude(ray.x) * dyn.factor
    return [branch, ray.tau, *ray.x.tolist(), *ray.k.tolist(), b_rf]


def _fly_to_plane(
    pkt: WKBPacket,
    profile: FieldProfile,
    plane: float,
    dtau: float,
    max_steps: int,
    sample_every: int,
    with_spin: bool,
):
    dyn = _Dynamics(profile, pkt.mass, pkt.branch, pkt.reference_velocity)
    ray = _packet_to_ray(pkt, with_spin)
    a_low = profile._a_low
    x0 = profile.origin

    def beam_coord(x):
        return -float((x - x0) @ a_low)

    samples = [_sample_row(pkt.branch, ray, dyn)] if sample_every else []
    s_old = beam_coord(ray.x)
    for step in range(1, max_steps + 1):
        new = dyn.step(ray, dtau)
        s_new = beam_coord(new.x)
        if s_new >= plane:
            frac = (plane - s_old) / (s_new - s_old)
            hit = _Ray(
                ray.x + frac * (new.x - ray.x),
                ray.k + frac * (new.k - ray.k),
                None if ray.phi is None else ray.phi + frac * (new.phi - ray.phi),
                ray.tau + frac * dtau,
            )
            if sample_every:
                samples.append(_sample_row(pkt.branch, hit, dyn))
            return hit, step, samples
        ray, s_old = new, s_new
        if sample_every and step % sample_every == 0:
            samples.append(_sample_row(pkt.branch, ray, dyn))
    raise IntegrationError(f"branch {pkt.branch:+d} did not reach the detector plane in {max_steps} steps")


def default_start(profile: FieldProfile) -> np.ndarray:
    """Event on the beam line two edge widths plus a tenth of the slab length before the slab."""
    s0, s1 = profile.slab
    lead = profile.edge_width + 0.1 * (s1 - s0)
    return profile.origin + (s0 - profile.edge_width - lead) * profile.beam_axis


def run_measurement(
    psi: Spinor,
    profile: FieldProfile,
    detector_plane: float,
    *,
    start=None,
    dtau: float = DEFAULT_DTAU,
    max_steps: int = DEFAULT_MAX_STEPS,
    packet_width: float = 1e-3,
    sample_every: int = 0,
    parallel: bool = False,
) -> MeasurementOutcomeReport:
    """Split ``psi``, fly both branches to the detector plane and report the spots.

    ``detector_plane`` is a device-frame coordinate along the beam axis and
    must lie beyond the slab. Deflections are measured against a reference
    ray that feels the Lorentz force but no gradient force.
    """
    _validate_step(dtau)
    s0, s1 = profile.slab
    if detector_plane <= s1 + profile.edge_width:
        raise DomainError("detector plane must lie beyond the slab")
    x_start = default_start(profile) if start is None else np.asarray(start, dtype=float)
    if profile.device_coordinates(x_start)[1] >= detector_plane:
        raise DomainError("start event is already past the detector plane")
    if dot(psi.momentum, profile.beam_axis) >= 0.0:
        raise DomainError("packet is not moving toward the detector plane")
    plus, minus = split(psi, profile.config, x_start)
    reference = replace(plus, branch=0)

    def fly(pkt):
        return _fly_to_plane(pkt, profile, detector_plane, dtau, max_steps, sample_every, pkt.branch != 0)

    jobs = (plus, minus, reference)
    if parallel:
        with ThreadPoolExecutor(max_workers=3) as pool:
            results = list(pool.map(fly, jobs))
    else:
        results = [fly(p) for p in jobs]

    ref_transverse = profile.device_coordinates(results[2][0].x)[2:]
    outcomes = []
    for pkt, (hit, steps, samples) in zip((plus, minus), results[:2]):
        transverse = profile.device_coordinates(hit.x)[2:]
        outcomes.append(
            BranchOutcome(
                branch=pkt.branch,
                weight=pkt.probability,
                amplitude=pkt.weight,
                arrival=hit.x,
                arrival_wavevector=hit.k,
                transverse=transverse,
                deflection=transverse - ref_transverse,
                tau=hit.tau,
                steps=steps,
                final_state=Spinor(hit.phi, hit.k),
                samples=samples,
            )
        )
    separation = float(np.linalg.norm(outcomes[0].transverse - outcomes[1].transverse))
    return MeasurementOutcomeReport(
        plus=outcomes[0],
        minus=outcomes[1],
        reference_transverse=ref_transverse,
        separation=separation,
        packet_width=packet_width,
        resolved=separation > packet_width,
        maxwell_violation=profile.maxwell_violation(),
    )


def write_trajectory_csv(path, samples) -> None:
    """Write trajectory samples with the standard header."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for row in samples:
            writer.writerow([row[0], *(f"{x:.15g}" for x in row[1:])])
