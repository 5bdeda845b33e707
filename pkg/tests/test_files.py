import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from signvar.core import (
    Dataset,
    FREE,
    MINUS,
    ParameterState,
    ParseError,
    PLUS,
    SignPattern,
    ValidationError,
    ZERO,
)
from signvar.files import (
    file_sha256,
    load_config,
    parse_config,
    read_dataset_csv,
    read_draw_archive,
    read_irf_csv,
    read_pattern_csv,
    write_dataset_csv,
    write_draw_archive,
    write_irf_csv,
    write_manifest,
    write_pattern_csv,
)


def _random_states(n_draws, n, k, r, t_eff, seed=0):
    gen = np.random.default_rng(seed)
    out = []
    for _ in range(n_draws):
        out.append(
            ParameterState(
                phi=gen.normal(size=(n, k)),
                loadings=gen.normal(size=(n, r)),
                factors=gen.normal(size=(t_eff, r)),
                sigma2=np.exp(gen.normal(size=n)),
                psi2=np.ones((n, k)),
                tau=np.ones(n),
            )
        )
    return out


class TestDatasetCsv:
    def test_round_trip_exact(self, tmp_path):
        gen = np.random.default_rng(1)
        data = Dataset(gen.normal(size=(7, 3)) * 1e3, names=["gdp", "cpi", "ffr"])
        path = str(tmp_path / "data.csv")
        write_dataset_csv(path, data)
        back, dates = read_dataset_csv(path)
        assert dates is None
        assert back.names == ["gdp", "cpi", "ffr"]
        assert_array_equal(back.observations, data.observations)

    def test_date_column_round_trip(self, tmp_path):
        data = Dataset(np.arange(6.0).reshape(3, 2), names=["a", "b"])
        dates = ["1990Q1", "1990Q2", "1990Q3"]
        path = str(tmp_path / "dated.csv")
        write_dataset_csv(path, data, dates=dates)
        back, back_dates = read_dataset_csv(path)
        assert back_dates == dates
        assert back.names == ["a", "b"]
        assert_array_equal(back.observations, data.observations)

    def test_parse_errors(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n3\n")
        with pytest.raises(ParseError, match="row 3"):
            read_dataset_csv(str(p))
        p.write_text("a,b\n1,x\n")
        with pytest.raises(ParseError, match="row 2"):
            read_dataset_csv(str(p))
        p.write_text("a,b\n")
        with pytest.raises(ParseError):
            read_dataset_csv(str(p))
        with pytest.raises(ParseError):
            read_dataset_csv(str(tmp_path / "missing.csv"))

    def test_date_count_mismatch(self, tmp_path):
        data = Dataset(np.zeros((3, 1)), names=["a"])
        with pytest.raises(ValidationError):
            write_dataset_csv(str(tmp_path / "x.csv"), data, dates=["only-one"])


class TestPatternCsv:
    def test_round_trip(self, tmp_path):
        codes = np.array(
            [[PLUS, MINUS, ZERO], [FREE, PLUS, MINUS]], dtype=np.int8
        )
        path = str(tmp_path / "pattern.csv")
        write_pattern_csv(path, SignPattern(codes))
        back = read_pattern_csv(path)
        assert_array_equal(back.codes, codes)

    def test_token_variants(self, tmp_path):
        p = tmp_path / "pat.csv"
        p.write_text("+1,1,na\n-1,0,NA\n")
        pattern = read_pattern_csv(str(p))
        assert_array_equal(
            pattern.codes,
            np.array([[PLUS, PLUS, FREE], [MINUS, ZERO, FREE]], dtype=np.int8),
        )

    def test_bad_cells(self, tmp_path):
        p = tmp_path / "pat.csv"
        p.write_text("+1,maybe\n")
        with pytest.raises(ParseError, match="row 1 col 2"):
            read_pattern_csv(str(p))
        p.write_text("+1,-1\n+1\n")
        with pytest.raises(ParseError, match="row 2"):
            read_pattern_csv(str(p))
        p.write_text("")
        with pytest.raises(ParseError):
            read_pattern_csv(str(p))


class TestConfig:
    def test_defaults(self):
        cfg = parse_config({"model": {"p": 4, "r": 2}})
        assert cfg.p == 4 and cfg.r == 2
        assert cfg.mcmc.total_draws == 550_000
        assert cfg.mcmc.burn_in == 50_000
        assert cfg.mcmc.thin == 100
        assert cfg.prior.mode == "horseshoe"
        assert cfg.quantiles == [0.16, 0.5, 0.84]
        assert cfg.horizon == 20
        assert not cfg.save_factors

    def test_full_document(self, tmp_path):
        doc = {
            "model": {"p": 2, "r": 1, "tcodes": [1, 5]},
            "prior": {"mode": "diffuse", "kappa": 0.5},
            "mcmc": {"total": 1000, "burn": 200, "thin": 4, "seed": 7},
            "output": {"quantiles": [0.1, 0.9], "horizon": 8, "save_factors": True},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = load_config(str(path))
        assert cfg.tcodes == [1, 5]
        assert cfg.prior.mode == "diffuse"
        assert cfg.prior.kappa == 0.5
        assert cfg.mcmc.total_draws == 1000 and cfg.mcmc.burn_in == 200
        assert cfg.mcmc.seed == 7
        assert cfg.quantiles == [0.1, 0.9]
        assert cfg.horizon == 8
        assert cfg.save_factors

    def test_snapshot_round_trips_through_parse(self):
        cfg = parse_config(
            {"model": {"p": 3, "r": 2}, "mcmc": {"total": 500, "burn": 100}}
        )
        snap = cfg.snapshot()
        again = parse_config(json.loads(json.dumps(snap)))
        assert again == cfg

    def test_rejections(self):
        with pytest.raises(ValidationError, match="model.p and model.r"):
            parse_config({"model": {"p": 2}})
        with pytest.raises(ValidationError, match="unknown config sections"):
            parse_config({"model": {"p": 1, "r": 1}, "extra": {}})
        with pytest.raises(ValidationError, match="unknown keys"):
            parse_config({"model": {"p": 1, "r": 1, "bogus": 3}})
        with pytest.raises(ValidationError):
            parse_config({"model": {"p": 0, "r": 1}})
        with pytest.raises(ValidationError):
            parse_config({"model": {"p": 1, "r": 1}, "output": {"quantiles": [2.0]}})
        with pytest.raises(ValidationError):
            parse_config({"model": {"p": 1, "r": 1}, "mcmc": {"thin": "soon"}})

    def test_load_errors(self, tmp_path):
        with pytest.raises(ParseError):
            load_config(str(tmp_path / "absent.json"))
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ParseError):
            load_config(str(bad))


class TestDrawArchive:
    def test_round_trip_bitwise(self, tmp_path):
        draws = _random_states(5, n=3, k=4, r=2, t_eff=6, seed=2)
        base = str(tmp_path / "draws")
        bin_path, txt_path = write_draw_archive(base, draws)
        assert bin_path.endswith(".bin") and txt_path.endswith(".txt")
        back = read_draw_archive(base)
        assert set(back) == {"phi", "lambda", "sigma2"}
        assert_array_equal(back["phi"], np.stack([d.phi for d in draws]))
        assert_array_equal(back["lambda"], np.stack([d.loadings for d in draws]))
        assert_array_equal(back["sigma2"], np.stack([d.sigma2 for d in draws]))

    def test_factors_block_optional(self, tmp_path):
        draws = _random_states(3, n=2, k=3, r=2, t_eff=5, seed=3)
        base = str(tmp_path / "withf")
        write_draw_archive(base, draws, save_factors=True)
        back = read_draw_archive(base)
        assert "factors" in back
        assert_array_equal(back["factors"], np.stack([d.factors for d in draws]))

    def test_single_column_blocks_come_back_flat(self, tmp_path):
        draws = _random_states(3, n=2, k=3, r=1, t_eff=5, seed=7)
        base = str(tmp_path / "flat")
        write_draw_archive(base, draws, save_factors=True)
        back = read_draw_archive(base)
        assert back["lambda"].shape == (3, 2)
        assert back["factors"].shape == (3, 5)
        assert_array_equal(back["factors"][1], draws[1].factors[:, 0])

    def test_sidecar_is_human_readable(self, tmp_path):
        draws = _random_states(2, n=2, k=3, r=1, t_eff=4, seed=4)
        base = str(tmp_path / "doc")
        _, txt_path = write_draw_archive(base, draws)
        text = open(txt_path).read()
        assert "n_draws: 2" in text
        assert "block: phi 2 3" in text
        assert "block: lambda 2 1" in text

    def test_corruption_detected(self, tmp_path):
        draws = _random_states(2, n=2, k=3, r=1, t_eff=4, seed=5)
        base = str(tmp_path / "trunc")
        bin_path, _ = write_draw_archive(base, draws)
        blob = open(bin_path, "rb").read()
        open(bin_path, "wb").write(blob[:-8])
        with pytest.raises(ParseError, match="expected"):
            read_draw_archive(base)

    def test_empty_raises(self, tmp_path):
        with pytest.raises(ValidationError):
            write_draw_archive(str(tmp_path / "x"), [])


class TestIrfCsv:
    def test_round_trip_exact(self, tmp_path):
        gen = np.random.default_rng(6)
        resp = gen.normal(size=(5, 3, 2))
        path = str(tmp_path / "irf.csv")
        write_irf_csv(path, resp, ["a", "b", "c"], ["demand", "supply"])
        back, vnames, snames = read_irf_csv(path)
        assert vnames == ["a", "b", "c"]
        assert snames == ["demand", "supply"]
        assert_array_equal(back, resp)

    def test_default_shock_names(self, tmp_path):
        resp = np.zeros((2, 2, 2))
        path = str(tmp_path / "irf2.csv")
        write_irf_csv(path, resp, ["a", "b"])
        _, _, snames = read_irf_csv(path)
        assert snames == ["shock1", "shock2"]

    def test_errors(self, tmp_path):
        with pytest.raises(ValidationError):
            write_irf_csv(str(tmp_path / "x.csv"), np.zeros((2, 2, 1)), ["a"])
        p = tmp_path / "noise.csv"
        p.write_text("nope\n")
        with pytest.raises(ParseError):
            read_irf_csv(str(p))
        p.write_text("horizon,variable,shock,value\n0,a,s,1.0\n2,a,s,1.0\n")
        with pytest.raises(ParseError, match="incomplete"):
            read_irf_csv(str(p))


class TestManifest:
    def test_digests_and_layout(self, tmp_path):
        from datetime import datetime, timezone

        inp = tmp_path / "in.csv"
        inp.write_text("a\n1\n")
        out = tmp_path / "out.bin"
        out.write_bytes(b"\x00\x01")
        path = str(tmp_path / "manifest.json")
        manifest = write_manifest(
            path,
            command="estimate",
            config_snapshot={"model": {"p": 1, "r": 1}},
            seed=11,
            inputs={"data": str(inp)},
            outputs=[str(out)],
            started=datetime.now(timezone.utc),
        )
        on_disk = json.load(open(path))
        assert on_disk == manifest
        assert on_disk["command"] == "estimate"
        assert on_disk["seed"] == 11
        assert on_disk["inputs"]["data"]["sha256"] == file_sha256(str(inp))
        assert on_disk["outputs"][0]["path"] == "out.bin"
        assert on_disk["outputs"][0]["sha256"] == file_sha256(str(out))
        assert on_disk["started"] <= on_disk["finished"]

    def test_sha256_known_value(self, tmp_path):
        p = tmp_path / "known.txt"
        p.write_text("abc")
        assert file_sha256(str(p)) == (
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        )
