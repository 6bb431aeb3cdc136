from gravvortex.config import SolverConfig
from gravvortex.coupled import continue_path, initial_state
from gravvortex.estimates import run_all
from gravvortex.plotting import plot_continuation, plot_margins, plot_profile
from gravvortex.profile import COLUMNS, profile_table

PNG = b"\x89PNG\r\n\x1a\n"


def test_figures_are_written(tps24, tmp_path):
    cols = dict(zip(COLUMNS, profile_table(tps24, n=61).T))
    for path in (
        plot_profile(cols, tmp_path / "p.png", title="profile"),
        plot_margins(run_all(tps24, with_lambda1=False), tmp_path / "m.png"),
    ):
        assert path.read_bytes()[:8] == PNG


def test_continuation_figure(ts0, tmp_path):
    cfg = SolverConfig(L=16)
    rep = continue_path(initial_state(ts0.divisor, ts0.tau, cfg), 0.01, cfg)
    path = plot_continuation(rep, tmp_path / "c.png")
    assert path.read_bytes()[:8] == PNG
    # the report dict form is accepted as well
    assert plot_continuation(rep.to_dict(), tmp_path / "d.png").read_bytes()[:8] == PNG
