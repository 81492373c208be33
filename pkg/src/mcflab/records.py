"""Flow records: the discrete space-time track of an evolving surface."""

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from mcflab.errors import NoCorrespondence, TimeNotCovered
from mcflab.geometry import SpaceTimePoint, TriMesh
from mcflab.levelset import CompressedField, LevelSetField, extract_isosurface

EXTINCT = "extinct"
SINGULAR = "singular"
TIME_BUDGET = "time_budget"


@dataclass
class Termination:
    kind: str
    time: float | None = None
    candidates: list = dataclass_field(default_factory=list)


class Snapshot:
    """One time slice; holds a mesh, a compressed level-set field, or both."""

    def __init__(self, t, mesh=None, field=None):
        self.t = float(t)
        self._mesh = mesh
        self._field = field
        self._mesh_cache = {}

    @property
    def has_field(self):
        return self._field is not None

    def field(self):
        if self._field is None:
            raise TimeNotCovered(f"snapshot at t={self.t} carries no field")
        if isinstance(self._field, CompressedField):
            return self._field.restore()
        return self._field

    def mesh(self, coarsen=1):
        if self._mesh is not None and coarsen == 1:
            return self._mesh
        if self._field is None:
            if coarsen != 1:
                return self._mesh
            raise TimeNotCovered(f"snapshot at t={self.t} carries no surface")
        if coarsen not in self._mesh_cache:
            self._mesh_cache[coarsen] = _extract_coarse(self.field(), coarsen)
        return self._mesh_cache[coarsen]


def _extract_coarse(field, coarsen):
    if coarsen == 1:
        return extract_isosurface(field)
    if any(field.periodic) and field.dims[0] % coarsen != 0:
        coarsen = 1
    sub = field.values[::coarsen, ::coarsen, ::coarsen]
    f = LevelSetField(field.origin, field.spacing * coarsen, sub,
                      periodic=field.periodic)
    return extract_isosurface(f)


class FlowRecord:
    """Time-ordered snapshots with solver metadata.

    exact_slice, when set, generates the surface at arbitrary times in
    [t_start, t_end] (used by closed-form reference flows); otherwise
    slices between snapshots are linearly interpolated: field values for
    level-set records, vertex positions for fixed-connectivity records.
    """

    def __init__(self, snapshots, scheme, h, c_cfl=0.25, dt_values=None,
                 termination=None, exact_slice=None, time_range=None):
        self.snapshots = sorted(snapshots, key=lambda s: s.t)
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        self.scheme = scheme
        self.h = float(h)
        self.c_cfl = float(c_cfl)
        self.dt_values = None if dt_values is None else np.asarray(dt_values)
        self.termination = termination or Termination(TIME_BUDGET)
        self.exact_slice = exact_slice
        self._range = time_range
        self._interp_cache = {}

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    def time_range(self):
        if self._range is not None:
            return self._range
        t = self.times
        return float(t[0]), float(t[-1])

    def covers(self, t):
        lo, hi = self.time_range()
        return lo - 1e-12 <= t <= hi + 1e-12

    def snapshot_at(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        return self.snapshots[i]

    def _bracket(self, t):
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise TimeNotCovered(
                f"t={t} outside snapshot range [{times[0]}, {times[-1]}]")
        j = int(np.searchsorted(times, t))
        j = min(max(j, 1), len(times) - 1)
        return self.snapshots[j - 1], self.snapshots[j]

    def slice_mesh(self, t, coarsen=1):
        """Surface at time t (exact, snapshot, or interpolated)."""
        if self.exact_slice is not None:
            if not self.covers(t):
                raise TimeNotCovered(f"t={t} outside exact range {self.time_range()}")
            return self.exact_slice(t)
        key = (round(t, 15), coarsen)
        if key in self._interp_cache:
            return self._interp_cache[key]
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) < 1e-12:
            return self.snapshots[i].mesh(coarsen)
        a, b = self._bracket(t)
        s = (t - a.t) / (b.t - a.t)
        if a.has_field and b.has_field:
            fa, fb = a.field(), b.field()
            f = fa.with_values((1.0 - s) * fa.values + s * fb.values)
            mesh = _extract_coarse(f, coarsen)
        else:
            ma, mb = a.mesh(), b.mesh()
            if ma.faces.shape != mb.faces.shape or not np.array_equal(ma.faces, mb.faces):
                raise NoCorrespondence(
                    "cannot interpolate between meshes with different connectivity")
            mesh = TriMesh((1.0 - s) * ma.vertices + s * mb.vertices, ma.faces,
                           periodic_x=ma.periodic_x, check=False)
        if len(self._interp_cache) > 64:
            self._interp_cache.clear()
        self._interp_cache[key] = mesh
        return mesh

    def slice_field(self, t):
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) < 1e-12:
            return self.snapshots[i].field()
        a, b = self._bracket(t)
        s = (t - a.t) / (b.t - a.t)
        fa, fb = a.field(), b.field()
        return fa.with_values((1.0 - s) * fa.values + s * fb.values)


def parabolic_rescale(record, lam, center):
    """x' = lam (x - x0), t' = lam^2 (t - t0) applied to a whole record."""
    if lam <= 0:
        raise ValueError("parabolic rescaling factor must be positive")
    x0 = center.x0
    t0 = center.t0
    lam = float(lam)

    def tfwd(t):
        return lam * lam * (t - t0)

    def tback(tp):
        return t0 + tp / (lam * lam)

    snaps = []
    for s in record.snapshots:
        mesh = s._mesh
        fld = s._field
        new_mesh = None if mesh is None else mesh.scaled(lam, center=x0)
        new_field = None if fld is None else _rescale_field(fld, lam, x0)
        snaps.append(Snapshot(tfwd(s.t), mesh=new_mesh, field=new_field))

    exact = None
    if record.exact_slice is not None:
        base = record.exact_slice

        def exact(tp):
            return base(tback(tp)).scaled(lam, center=x0)

    term = record.termination
    new_term = Termination(
        term.kind,
        None if term.time is None else tfwd(term.time),
        [SpaceTimePoint(lam * (c.x0 - x0), tfwd(c.t0)) for c in term.candidates],
    )
    lo, hi = record.time_range()
    return FlowRecord(
        snaps, record.scheme, record.h * lam, c_cfl=record.c_cfl,
        dt_values=None if record.dt_values is None else record.dt_values * lam**2,
        termination=new_term, exact_slice=exact,
        time_range=(tfwd(lo), tfwd(hi)))


def _rescale_field(fld, lam, x0):
    if isinstance(fld, CompressedField):
        fld = fld.restore()
    return LevelSetField(lam * (fld.origin - x0), lam * fld.spacing,
                         lam * fld.values, periodic=fld.periodic)
