"""Test-only bridge to the HiGHS solver shipped with scipy."""
import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

from oran_placer.milp import to_matrix_form


def solve(model, time_limit=120):
    """Optimal assignment as ``{name: value}``, or ``None`` when HiGHS finds none.

    Presolve is off (it mis-reports some big-M instances as infeasible). The
    continuous part is re-solved with the integers fixed so the returned point
    satisfies equalities to LP precision.
    """
    names, c, rows, cols, vals, lo, hi, lb, ub, integ = to_matrix_form(model)
    a = coo_matrix((vals, (rows, cols)), shape=(len(lo), len(names))).tocsr()
    res = milp(c, constraints=LinearConstraint(a, lo, hi), bounds=Bounds(lb, ub),
               integrality=integ, options={"time_limit": time_limit, "mip_rel_gap": 0,
                                           "presolve": False})
    if res.x is None:
        return None
    x = res.x.copy()
    x[integ == 1] = np.round(x[integ == 1])
    lb2 = np.where(integ == 1, x, lb)
    ub2 = np.where(integ == 1, x, ub)
    res2 = milp(c, constraints=LinearConstraint(a, lo, hi), bounds=Bounds(lb2, ub2),
                options={"presolve": False})
    if res2.x is not None:
        x = res2.x.copy()
        x[integ == 1] = lb2[integ == 1]
    return dict(zip(names, x))
