import numpy as np
from hypothesis import HealthCheck, settings, strategies as st

from hkcone.measure import DiscreteMeasure

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

coords = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
masses = st.floats(0.1, 3.0, allow_nan=False, allow_infinity=False)


@st.composite
def measures(draw, max_atoms=4, dim=2):
    n = draw(st.integers(1, max_atoms))
    x = draw(st.lists(st.lists(coords, min_size=dim, max_size=dim), min_size=n, max_size=n))
    m = draw(st.lists(masses, min_size=n, max_size=n))
    return DiscreteMeasure(np.array(x), np.array(m))
