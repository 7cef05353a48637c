import json
import logging

import numpy as np
import pandas as pd
import pytest

from utils import (MetricLogger, SmoothedValue, append_log, config_hash, deep_update, loglog_slope,
                   to_jsonable, write_csv, write_json)


def test_smoothed_value():
    v = SmoothedValue(window_size=3)
    for x in [1.0, 2.0, 3.0, 10.0]:
        v.update(x)
    assert v.median == 3.0
    assert v.max == 10.0
    assert v.value == 10.0
    assert v.global_avg == pytest.approx(4.0)


def test_metric_logger_reports_progress(caplog):
    logger = logging.getLogger('test_metric_logger')
    metric_logger = MetricLogger(delimiter='  ')
    seen = []
    with caplog.at_level(logging.INFO, logger='test_metric_logger'):
        for i in metric_logger.log_every(range(5), 2, 'Sweep', logger=logger):
            metric_logger.update(err=np.float64(0.1 * i))
            seen.append(i)
    assert seen == list(range(5))
    messages = [r.getMessage() for r in caplog.records]
    # items 0, 2, 4 plus the closing summary
    assert len(messages) == 4
    assert messages[0].startswith('Sweep  [0/5]')
    assert 'Total time' in messages[-1]
    assert 'err' in str(metric_logger)
    with pytest.raises(AttributeError):
        metric_logger.missing


def test_to_jsonable():
    obj = {'a': np.arange(2), 'z': 1 + 2j, 'n': np.float64(np.inf), 1: (np.int64(3),)}
    assert to_jsonable(obj) == {'a': [0, 1], 'z': {'re': 1.0, 'im': 2.0}, 'n': 'inf', '1': [3]}


def test_write_json(tmp_path):
    path = tmp_path / 'out.json'
    write_json({'values': np.array([0.5, 1.5]), 'count': np.int64(2)}, str(path))
    assert json.loads(path.read_text()) == {'values': [0.5, 1.5], 'count': 2}


def test_csv_keeps_full_precision(tmp_path):
    path = tmp_path / 'curve.csv'
    values = [1 / 3, np.pi * 1e-9, 2.0 ** 0.5]
    write_csv(pd.DataFrame({'t': [0.0, 1.0, 2.0], 'numeric': values}), str(path))
    back = pd.read_csv(path, float_precision='round_trip')
    assert list(back.columns) == ['t', 'numeric']
    assert back['numeric'].tolist() == values


def test_deep_update():
    base = {'a': 1, 'nested': {'x': 1, 'y': 2}}
    out = deep_update(base, {'nested': {'y': 3, 'z': 4}, 'b': 5})
    assert out == {'a': 1, 'b': 5, 'nested': {'x': 1, 'y': 3, 'z': 4}}


def test_config_hash_ignores_key_order():
    a = config_hash({'x': 1, 'params': {'eta': 0.1, 'omega': 1.0}})
    b = config_hash({'params': {'omega': 1.0, 'eta': 0.1}, 'x': 1})
    assert a == b and len(a) == 64
    assert a != config_hash({'x': 2, 'params': {'eta': 0.1, 'omega': 1.0}})


def test_loglog_slope():
    n = np.array([100, 1000, 10000])
    assert loglog_slope(n, 3.0 / np.sqrt(n)) == pytest.approx(-0.5)


def test_append_log(tmp_path):
    append_log({'criterion': 'a', 'value': 1e-12}, str(tmp_path))
    append_log({'criterion': 'b', 'value': np.float64(0.5)}, str(tmp_path))
    lines = (tmp_path / 'log.txt').read_text().splitlines()
    assert [json.loads(line)['criterion'] for line in lines] == ['a', 'b']
