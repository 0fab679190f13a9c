"""Tests for run manifests and deterministic JSON reports"""

import json
import math

import jsonschema
import numpy as np
import pytest

from qbm_modules.reports import dumps_document, to_jsonable, validate_document, write_json_document
from qbm_modules.run_manifest import MANIFEST_NAME, RunManifest


@pytest.fixture
def manifest(tmp_path):
    return RunManifest('solve2d', ['configuration', 'initial_data', 'evolution', 'artifacts'], tmp_path)


class TestRunManifest:
    """Stage bookkeeping and the written manifest"""

    def test_unknown_stage(self, tmp_path):
        with pytest.raises(KeyError):
            RunManifest('solve2d', ['configuration', 'plotting'], tmp_path)

    def test_stage_outside_run(self, manifest):
        with pytest.raises(KeyError):
            manifest.start_stage('ermakov')

    def test_stage_lifecycle(self, manifest):
        manifest.start_stage('configuration')
        assert manifest.progress['configuration'].status == 'in_progress'
        manifest.complete_stage('configuration', {'grid': [41, 41]})
        manifest.start_stage('initial_data')
        manifest.fail_stage('initial_data', 'sx must be positive')
        summary = manifest.get_progress_summary()
        assert summary == {
            'total_stages': 4,
            'completed': 1,
            'failed': 1,
            'pending': 2,
            'failed_stages': ['initial_data'],
        }
        stages = manifest.to_dict()['stages']
        assert stages[0]['details'] == {'grid': [41, 41]}
        assert stages[1]['error'] == 'sx must be positive'
        assert stages[1]['id'] == 'INI-002'

    def test_paths_are_relative(self, manifest, tmp_path):
        manifest.record_snapshot(tmp_path / 'fields' / 'z_0001.csv', np.float64(0.05))
        manifest.record_artifact(tmp_path / 'report.json')
        manifest.record_artifact(tmp_path / 'fields' / 'z_0001.json')
        data = manifest.to_dict()
        assert data['snapshots'] == [{'path': 'fields/z_0001.csv', 't': 0.05}]
        assert data['artifacts'] == ['fields/z_0001.json', 'report.json']

    def test_save_is_deterministic(self, manifest, tmp_path):
        manifest.start_stage('configuration')
        manifest.complete_stage('configuration')
        manifest.verdict = 'passed'
        first = manifest.save().read_bytes()
        manifest.durations['configuration'] = 123.0
        second = manifest.save().read_bytes()
        assert first == second
        data = json.loads(first)
        assert data['command'] == 'solve2d'
        assert 'durations' not in data
        assert (tmp_path / MANIFEST_NAME).exists()


class TestReports:
    """Normalization, validation and byte-stable output"""

    def test_to_jsonable(self):
        payload = {'a': np.arange(3), 'b': (1, np.float32(0.5)), 'c': math.inf, 'd': float('nan'), 'e': 1 + 2j, 1: np.bool_(True)}
        assert to_jsonable(payload) == {
            'a': [0, 1, 2],
            'b': [1, 0.5],
            'c': 'inf',
            'd': 'nan',
            'e': {'re': 1.0, 'im': 2.0},
            '1': True,
        }

    def test_sorted_output(self):
        assert dumps_document({'b': 1, 'a': 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_schema_violation(self, tmp_path):
        with pytest.raises(jsonschema.ValidationError):
            write_json_document(tmp_path / 'm.json', {'command': 'solve2d'}, 'manifest')
        assert not (tmp_path / 'm.json').exists()

    def test_field_metadata_document(self):
        document = validate_document(
            {'kind': 'field1d', 't': 0.0, 'provenance': 'test', 'grid': {'w': {'min': -1.0, 'max': 1.0, 'n': 21}}},
            'field_metadata',
        )
        assert document['grid']['w']['n'] == 21
