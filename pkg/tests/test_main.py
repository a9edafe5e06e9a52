from dpxattn.__main__ import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, build_parser, load_config, main


def test_parser_keeps_defaults():
    args = build_parser().parse_args(["eval", "--epsilon", "0.5"])
    config = load_config(args)
    assert config.command == "eval"
    assert config.epsilon == 0.5
    assert config.alpha == 0.3


def test_command_line_overrides_config_file(tmp_path):
    configfile = tmp_path / "run.toml"
    configfile.write_text('epsilon = 1.5\nalpha = 0.2\n')
    args = build_parser().parse_args(["eval", "-c", str(configfile), "--alpha", "0.4"])
    config = load_config(args)
    assert config.epsilon == 1.5
    assert config.alpha == 0.4


def test_gen_and_eval(tmp_path):
    data = str(tmp_path / "data")
    assert main(["gen", "--data-dir", data, "--n", "16", "--m", "2"]) == EXIT_OK
    assert main(["eval", "--data-dir", data, "--mode", "l1", "--trials", "2",
                 "-o", str(tmp_path / "report.json")]) == EXIT_OK
    assert (tmp_path / "report.json").exists()


def test_invalid_parameters(tmp_path):
    data = str(tmp_path / "data")
    assert main(["gen", "--data-dir", data, "--n", "4", "--m", "1"]) == EXIT_OK
    assert main(["eval", "--data-dir", data, "--noise", "off",
                 "-o", str(tmp_path / "report.json")]) == EXIT_INVALID
    assert main(["eval", "--data-dir", str(tmp_path / "missing"),
                 "-o", str(tmp_path / "report.json")]) == EXIT_INVALID


def test_infeasible(tmp_path):
    data = str(tmp_path / "data")
    assert main(["gen", "--data-dir", data, "--n", "4", "--m", "1", "--dim", "3"]) == EXIT_OK
    assert main(["attack", "--data-dir", data, "--dim", "3", "--l-override", "1",
                 "-o", str(tmp_path / "report.json")]) == EXIT_INFEASIBLE
    assert main(["eval", "--data-dir", data, "--dim", "3", "--mode", "adaptive",
                 "--epsilon", "0.001", "--l-override", "10000",
                 "-o", str(tmp_path / "report.json")]) == EXIT_INFEASIBLE
