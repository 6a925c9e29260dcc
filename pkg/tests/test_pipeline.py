import pytest

from intersite.aggregate import read_table
from intersite.cocluster import FitConfig, read_model
from intersite.pipeline import PipelineConfig, expand_inputs, run_pipeline
from intersite.sessions import session_partition
from intersite.synth import SynthSpec, generate, write_synth


def test_expand_inputs_sorted_and_unique(data_dir):
    pattern = str(data_dir / "logs" / "*.csv")
    files = expand_inputs([pattern, pattern])
    assert len(files) == 3 and files == sorted(files)
    assert expand_inputs([str(data_dir / "nothing*.csv")]) == []


def test_run_pipeline_end_to_end(tmp_path):
    spec = SynthSpec(n_users=400, days=7)
    result = generate(spec, 12)
    write_synth(result, spec, tmp_path / "s")
    config = PipelineConfig(
        input_glob=[str(tmp_path / "s" / "logs" / "*.csv")],
        catalog_dir=tmp_path / "s" / "catalog",
        output_dir=tmp_path / "out",
        fit=FitConfig(3, 2, restarts=5),
    )
    run = run_pipeline(config)
    assert session_partition(run.groups) == result.truth_partition()
    assert run.n_requests == len(result.requests)
    assert run.table == result.tally == read_table(run.paths["table"])
    assert read_model(run.paths["model"]).chi2 == run.model.chi2
    assert 0 < run.reduction < 1
    assert all(p.is_file() for p in run.paths.values())


def test_run_pipeline_missing_inputs(tmp_path):
    with pytest.raises(FileNotFoundError):
        run_pipeline(PipelineConfig(input_glob=[str(tmp_path / "*.csv")], output_dir=tmp_path))
    with pytest.raises(FileNotFoundError):
        PipelineConfig(input_glob=[__file__], catalog_dir=tmp_path / "nope").check_paths()
