import numpy as np

from nonlocalfv.measures import InitialDatum


def parabolic_bump_datum():
    """Smooth-ish compactly supported density, symmetric about pi, mass 1."""

    def rho(t):
        t = np.asarray(t)
        return np.where(
            (t >= np.pi / 2) & (t <= 3 * np.pi / 2),
            (6 / np.pi**3) * (3 * np.pi / 2 - t) * (t - np.pi / 2),
            0.0,
        )

    return InitialDatum(density=rho, breakpoints=(np.pi / 2, 3 * np.pi / 2))


def polynomial_2d_datum():
    """Separable density proportional to theta*omega on [pi/4, pi/2) x [0, 1]."""
    scale = 64 / (3 * np.pi**2)

    def f_theta(th):
        th = np.asarray(th)
        return np.where((th >= np.pi / 4) & (th < np.pi / 2), scale * th, 0.0)

    def f_omega(om):
        om = np.asarray(om)
        return np.where((om >= 0.0) & (om <= 1.0), om, 0.0)

    def dens(th, om):
        return f_theta(th) * f_omega(om)

    return InitialDatum(
        density=dens,
        breakpoints=(np.pi / 4, np.pi / 2),
        breakpoints_omega=(0.0, 1.0),
        factors=(f_theta, f_omega),
    )
