"""Command-line surface: flags, config files, exit codes, determinism."""

import pytest

from fouriersampler.analysis import parse_trace_csv
from fouriersampler.cli import main


def run(argv):
    return main(argv)


def decode_args(tmp_path, **over):
    args = {
        "backend": "template", "sampler": "fourier", "block-size": "16",
        "steps": "16", "gen-len": "32", "seed": "5",
    }
    args.update(over)
    argv = ["decode"]
    for key, value in args.items():
        if value is not None:
            argv += [f"--{key}", value]
    return argv


# --- decode -------------------------------------------------------------------


def test_decode_trace_has_block_times_steps_records(tmp_path):
    trace = tmp_path / "t.csv"
    argv = ["decode", "--backend", "template", "--sampler", "fourier",
            "--block-size", "64", "--steps", "64", "--rho", "0.2",
            "--trace", str(trace), "--out", str(tmp_path / "tokens.txt")]
    assert run(argv) == 0
    records = parse_trace_csv(trace.read_bytes())
    assert len(records) == 64 * 64  # one block: B * S records


def test_decode_fixed_beta_ablation(tmp_path):
    trace = tmp_path / "t.csv"
    argv = decode_args(tmp_path) + ["--beta-min", "0.4", "--beta-max", "0.4",
                                    "--trace", str(trace),
                                    "--out", str(tmp_path / "tok.txt")]
    assert run(argv) == 0
    records = parse_trace_csv(trace.read_bytes())
    assert all(r.beta == 0.4 for r in records)


def test_decode_zero_steps_is_validation_error(tmp_path, capsys):
    assert run(decode_args(tmp_path, steps="0")) == 1
    assert "steps" in capsys.readouterr().err


def test_unknown_flag_is_validation_error(capsys):
    assert run(["decode", "--frobnicate", "1"]) == 1


def test_unknown_subcommand_is_validation_error():
    assert run(["transcode"]) == 1


def test_help_documents_flags(capsys):
    for argv, expected in [
        (["decode", "--help"], ["--backend", "--sampler", "--rho", "--beta-min",
                                "--beta-max", "--epsilon", "--block-size", "--steps",
                                "--gen-len", "--seed", "--trace", "--record-dump",
                                "--config"]),
        (["analyze", "--help"], ["--dump", "--top-k", "--labels"]),
        (["compare", "--help"], ["--num-seeds", "--block-sizes", "--gen-len"]),
    ]:
        with pytest.raises(SystemExit) as exc:
            run(argv)
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in expected:
            assert flag in out


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text(
        "# experiment record\n"
        "backend = template\n"
        "gen_len = 16\n"
        "block_size = 16\n"
        "steps = 16\n"
        "seed = 9\n"
        "rho = 0.4\n",
        encoding="utf-8",
    )
    out_a = tmp_path / "a.txt"
    out_b = tmp_path / "b.txt"
    assert run(["decode", "--config", str(config), "--out", str(out_a)]) == 0
    assert run(["decode", "--config", str(config), "--seed", "9",
                "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    # a flag overriding a file value must be able to invalidate the run
    assert run(["decode", "--config", str(config), "--rho", "0"]) == 1


def test_config_file_unknown_key_is_named(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("blocksize = 16\n", encoding="utf-8")
    assert run(["decode", "--config", str(config)]) == 1
    assert "blocksize" in capsys.readouterr().err


def test_decode_artifacts_are_deterministic(tmp_path):
    paths = {}
    for tag in ("x", "y"):
        trace = tmp_path / f"{tag}.svg"
        dump = tmp_path / f"{tag}.fsd"
        tokens = tmp_path / f"{tag}.txt"
        argv = decode_args(tmp_path) + [
            "--trace", str(trace), "--trace-format", "svg",
            "--record-dump", str(dump), "--out", str(tokens),
        ]
        assert run(argv) == 0
        paths[tag] = (trace.read_bytes(), dump.read_bytes(), tokens.read_bytes())
    assert paths["x"] == paths["y"]


def test_decode_replay_roundtrip_via_cli(tmp_path):
    dump = tmp_path / "session.fsd"
    live_trace = tmp_path / "live.csv"
    replay_trace = tmp_path / "replay.csv"
    assert run(decode_args(tmp_path) + ["--record-dump", str(dump),
                                        "--trace", str(live_trace),
                                        "--out", str(tmp_path / "l.txt")]) == 0
    assert run(decode_args(tmp_path, backend="replay") +
               ["--dump", str(dump), "--trace", str(replay_trace),
                "--out", str(tmp_path / "r.txt")]) == 0
    assert replay_trace.read_bytes() == live_trace.read_bytes()


def test_decode_replay_missing_dump_flag(capsys):
    assert run(["decode", "--backend", "replay"]) == 1
    assert "dump" in capsys.readouterr().err


def test_decode_missing_dump_file_is_io_error(tmp_path):
    assert run(["decode", "--backend", "replay", "--dump",
                str(tmp_path / "absent.fsd")]) == 2


# --- analyze ------------------------------------------------------------------


def make_dump(tmp_path, **over):
    dump = tmp_path / "a.fsd"
    assert run(decode_args(tmp_path, **over) + ["--record-dump", str(dump),
                                                "--out", str(tmp_path / "_.txt")]) == 0
    return dump


def test_analyze_top_k_rows(tmp_path, capsys):
    dump = make_dump(tmp_path, **{"gen-len": "40", "block-size": "40",
                                  "steps": "40", "backend": "template"})
    assert run(["analyze", "--dump", str(dump), "--top-k", "14"]) == 0
    out = capsys.readouterr().out
    low_section, high_section = out.split("top-14 by low-frequency ratio:")[1].split(
        "top-14 by high-frequency ratio:"
    )
    for section in (low_section, high_section):
        rows = [l for l in section.splitlines() if l.strip().startswith("position")]
        assert len(rows) == 14


def test_analyze_dc_sinusoid_reports_all_low(tmp_path, capsys):
    dump = make_dump(tmp_path, backend="sinusoid", **{"gen-len": "16", "block-size": "16",
                                                      "steps": "16"})
    # overwrite with a DC-only fixture recorded through the API
    import numpy as np
    from fouriersampler import DumpRecorder, SamplerConfig, SinusoidBackend, Tone, decode

    backend = SinusoidBackend([[Tone(0.0, 1.0)]], np.zeros(4))
    recorder = DumpRecorder()
    decode(backend, [], SamplerConfig(), 16, 16, 16, seed=0, recorder=recorder)
    from fouriersampler import write_dump

    write_dump(recorder.finish(), dump)
    assert run(["analyze", "--dump", str(dump)]) == 0
    out = capsys.readouterr().out
    rows = [l for l in out.splitlines() if l and l[0].isspace() and "low" in l]
    table = [l for l in out.splitlines()
             if l.strip() and l.split()[0].isdigit()]
    assert len(table) == 16
    assert all("1.000000" in l and " low" in l for l in table)


def test_analyze_group_stats_and_missing_label(tmp_path, capsys):
    dump = make_dump(tmp_path)
    labels = tmp_path / "labels.tsv"
    labels.write_text("".join(f"{i}\tword\n" for i in range(16)), encoding="utf-8")
    assert run(["analyze", "--dump", str(dump), "--labels", str(labels)]) == 0
    assert "word" in capsys.readouterr().out
    short = tmp_path / "short.tsv"
    short.write_text("0\tword\n", encoding="utf-8")
    assert run(["analyze", "--dump", str(dump), "--labels", str(short)]) == 1
    assert "position" in capsys.readouterr().err


def test_analyze_corrupt_dump_is_io_error(tmp_path, capsys):
    dump = make_dump(tmp_path)
    data = bytearray(dump.read_bytes())
    data[45] ^= 0xFF
    dump.write_bytes(bytes(data))
    assert run(["analyze", "--dump", str(dump)]) == 2
    assert "crc" in capsys.readouterr().err.lower()


def test_analyze_report_deterministic(tmp_path):
    dump = make_dump(tmp_path)
    a = tmp_path / "ra.txt"
    b = tmp_path / "rb.txt"
    assert run(["analyze", "--dump", str(dump), "--out", str(a)]) == 0
    assert run(["analyze", "--dump", str(dump), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# --- compare ------------------------------------------------------------------


def test_compare_emits_sampler_rows(tmp_path, capsys):
    assert run(["compare", "--num-seeds", "2", "--gen-len", "16",
                "--block-sizes", "8,16"]) == 0
    out = capsys.readouterr().out
    for sampler in ("fourier", "confidence", "random", "left_to_right"):
        assert out.count(sampler) >= 2  # one row per block size (plus delta lines)
    data_rows = [l for l in out.splitlines() if l.strip() and l.split()[0].isdigit()]
    assert len(data_rows) == 2 * 4  # block sizes x samplers grid


def test_compare_rejects_single_seed(capsys):
    assert run(["compare", "--num-seeds", "1", "--gen-len", "16",
                "--block-sizes", "8"]) == 1
    assert "num_seeds" in capsys.readouterr().err


def test_compare_bad_block_sizes(capsys):
    assert run(["compare", "--block-sizes", "8,x"]) == 1


def test_compare_report_deterministic(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    for path in (a, b):
        assert run(["compare", "--num-seeds", "2", "--gen-len", "16",
                    "--block-sizes", "8", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
