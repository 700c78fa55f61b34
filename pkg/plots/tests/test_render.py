import json

import numpy as np
import pytest
from PIL import Image

from qldplots import FigureSpec, SchemaError, render
from qldplots.cli import main as cli_main

HEATMAP_HEADER = "gamma,T,fraction,n_converged,n_limit_cycle,n_non_convergent,n_diverged,cell_index,master_seed,config_hash,version\n"


def write_heatmap_csv(path, cells):
    rows = [
        f"{g},{t},{f},0,0,0,0,{i},1,abc,0.1.0" for i, (g, t, f) in enumerate(cells)
    ]
    path.write_text(HEATMAP_HEADER + "\n".join(rows) + "\n")
    return path


def write_boundary_csv(path):
    lines = ["network,N,T,fraction,T_all,n_games,cell_index,master_seed,config_hash,version"]
    for i, (t, f) in enumerate([(0.3, 1.0), (0.4, 0.6), (0.5, 0.2), (0.6, 0.0), (0.7, 0.0)]):
        lines.append(f"ring,8,{t},{f},0.6,30,{i},1,abc,0.1.0")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_sato_box_csv(path):
    lines = ["T,agent,min,q1,median,q3,max,label"]
    for t in (0.1, 0.45):
        for agent in range(3):
            spread = 0.4 if t == 0.1 else 0.01
            lines.append(
                f"{t},{agent},{0.33-spread},{0.33-spread/2},0.33,{0.33+spread/2},{0.33+spread},x"
            )
    path.write_text("\n".join(lines) + "\n")
    return path


def write_sato_traj_csv(path):
    lines = ["T,time,agent,action,probability"]
    rng = np.random.default_rng(3)
    for t in (0.1, 0.35):
        for step in range(40):
            probs = rng.dirichlet(np.ones(3))
            for action in range(3):
                lines.append(f"{t},{step},0,{action},{probs[action]:.6f}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_theory_csv(path):
    # frozen coarse output of the stability-boundary solver: two ordered,
    # non-crossing curves
    lines = ["N0,gamma,T_star,multi_crossing,evaluations"]
    curve1 = [(-0.9, 0.084), (-0.6, 0.386), (-0.3, 0.809), (-0.05, 1.519)]
    curve2 = [(-0.9, 0.120), (-0.6, 0.545), (-0.3, 1.144), (-0.05, 2.149)]
    for n0, curve in ((1, curve1), (2, curve2)):
        for gamma, t_star in curve:
            lines.append(f"{n0},{gamma},{t_star},false,20")
    path.write_text("\n".join(lines) + "\n")
    return path


def dominant_counts(png_path):
    arr = np.asarray(Image.open(png_path).convert("RGB"), dtype=int)
    red = int(((arr[:, :, 0] > arr[:, :, 2] + 40)).sum())
    blue = int(((arr[:, :, 2] > arr[:, :, 0] + 40)).sum())
    return red, blue


class TestRenderKinds:
    def test_all_five_kinds_render(self, tmp_path):
        inputs = {
            "heatmap": write_heatmap_csv(tmp_path / "h.csv", [(-1.0, 0.3, 0.0), (-1.0, 0.6, 0.0), (-0.3, 0.3, 1.0), (-0.3, 0.6, 0.5)]),
            "boundary": write_boundary_csv(tmp_path / "b.csv"),
            "sato-box": write_sato_box_csv(tmp_path / "sb.csv"),
            "sato-traj": write_sato_traj_csv(tmp_path / "st.csv"),
            "theory": write_theory_csv(tmp_path / "t.csv"),
        }
        for kind, path in inputs.items():
            out = render(FigureSpec(kind=kind, inputs=(str(path),), out_dir=str(tmp_path / kind)))
            assert len(out) == 2
            assert {p.suffix for p in out} == {".png", ".svg"}
            for p in out:
                assert p.stat().st_size > 0

    def test_render_is_deterministic(self, tmp_path):
        csv = write_heatmap_csv(tmp_path / "h.csv", [(-0.8, 0.4, 0.25), (-0.4, 0.4, 0.75)])
        spec1 = FigureSpec(kind="heatmap", inputs=(str(csv),), out_dir=str(tmp_path / "one"))
        spec2 = FigureSpec(kind="heatmap", inputs=(str(csv),), out_dir=str(tmp_path / "two"))
        first = render(spec1)
        second = render(spec2)
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes(), f"{a.suffix} differs"

    def test_heatmap_single_cool_cell(self, tmp_path):
        csv = write_heatmap_csv(tmp_path / "h.csv", [(-0.5, 0.5, 0.0)])
        png = render(FigureSpec(kind="heatmap", inputs=(str(csv),), out_dir=str(tmp_path / "o")))[0]
        red, blue = dominant_counts(png)
        assert blue > red  # fraction 0 renders cool

    def test_heatmap_hot_means_non_convergence(self, tmp_path):
        csv = write_heatmap_csv(tmp_path / "h.csv", [(-0.5, 0.5, 1.0)])
        png = render(FigureSpec(kind="heatmap", inputs=(str(csv),), out_dir=str(tmp_path / "o")))[0]
        red, blue = dominant_counts(png)
        assert red > blue  # fraction 1 renders hot

    def test_theory_fixture_curves_ordered(self, tmp_path):
        import pandas as pd

        csv = write_theory_csv(tmp_path / "t.csv")
        df = pd.read_csv(csv)
        one = df[df.N0 == 1].sort_values("gamma")["T_star"].to_numpy()
        two = df[df.N0 == 2].sort_values("gamma")["T_star"].to_numpy()
        assert (two > one).all()  # non-crossing, higher degree above
        render(FigureSpec(kind="theory", inputs=(str(csv),), out_dir=str(tmp_path / "o")))


class TestSchema:
    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("gamma,T\n-0.5,0.3\n")
        with pytest.raises(SchemaError, match="fraction"):
            render(FigureSpec(kind="heatmap", inputs=(str(path),), out_dir=str(tmp_path)))

    def test_unknown_manifest_schema_refused(self, tmp_path):
        csv = write_heatmap_csv(tmp_path / "h.csv", [(-0.5, 0.5, 0.0)])
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"schema_version": 99}))
        with pytest.raises(SchemaError, match="schema_version"):
            render(
                FigureSpec(
                    kind="heatmap", inputs=(str(csv),), out_dir=str(tmp_path),
                    manifest=str(manifest),
                )
            )

    def test_overlay_with_scaled_manifest(self, tmp_path):
        csv = write_heatmap_csv(
            tmp_path / "h.csv", [(-0.9, 0.3, 0.0), (-0.9, 0.6, 0.0), (-0.3, 0.3, 1.0), (-0.3, 0.6, 0.2)]
        )
        overlay = write_theory_csv(tmp_path / "t.csv")
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps({"schema_version": 1, "t_scale_convention": "scaled", "t_scale_num_actions": 12})
        )
        out = render(
            FigureSpec(
                kind="heatmap", inputs=(str(csv),), out_dir=str(tmp_path / "o"),
                overlay=str(overlay), manifest=str(manifest),
            )
        )
        assert out[0].exists()

    def test_bad_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            FigureSpec(kind="pie", inputs=("x.csv",), out_dir=str(tmp_path))

    def test_empty_inputs_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            FigureSpec(kind="heatmap", inputs=(), out_dir=str(tmp_path))


class TestCli:
    def test_render_via_cli(self, tmp_path, capsys):
        csv = write_theory_csv(tmp_path / "t.csv")
        rc = cli_main(
            ["render", "--kind", "theory", "--in", str(csv), "--out", str(tmp_path / "figs")]
        )
        assert rc == 0
        printed = capsys.readouterr().out.strip().split("\n")
        assert len(printed) == 2
        assert (tmp_path / "figs" / "theory_boundary.png").exists()
