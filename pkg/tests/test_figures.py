import pandas as pd

from bench.figures import FIGURE_COLUMNS, reproduce_figures
from bench.validation import count_local_maxima


def test_default_figures(tmp_path):
    written = reproduce_figures(tmp_path / "figures", threads=2)
    assert set(written) == {"ee_vs_antennas", "ee_vs_power", "summary"}

    antennas = pd.read_csv(written["ee_vs_antennas"])
    power = pd.read_csv(written["ee_vs_power"])
    assert list(antennas.columns) == FIGURE_COLUMNS
    assert len(antennas) == 2 * 31
    assert len(power) == 2 * 51
    assert sorted(antennas["pilot_length"].unique()) == [8, 16]
    assert (antennas["ee_bpj"] > 0).all()

    for _, curve in power.groupby("pilot_length"):
        assert count_local_maxima(curve["ee_bpj"]) == 1
    for pilot_length, curve in antennas.groupby("pilot_length"):
        x = curve["x"].to_numpy()
        peak = x[curve["ee_bpj"].to_numpy().argmax()]
        assert x[0] < peak < x[-1], f"pilot_length={pilot_length} peaks at N={peak}"
    peaks = antennas.groupby("pilot_length")["ee_bpj"].max()
    assert peaks[16] > peaks[8]

    summary = written["summary"].read_text(encoding="utf-8")
    assert "reconstruction" in summary
    assert summary.count("peak EE") == 4
