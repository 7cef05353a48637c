"""
Misc helpers: progress meters and result writers.
"""
import datetime
import hashlib
import os
import time
from collections import defaultdict, deque
# config hashes always use the stdlib encoder: sorted keys, no whitespace
import json as std_json

import numpy as np
import pandas as pd

try:
    import ujson as json
except ImportError:
    try:
        import simplejson as json
    except ImportError:
        import json


CSV_FLOAT_FORMAT = '%.17g'


class SmoothedValue(object):
    """Track a series of values and provide access to smoothed values over a
    window or the global series average.
    """

    def __init__(self, window_size=20, fmt=None):
        if fmt is None:
            fmt = "{median:.4g} ({global_avg:.4g})"
        self.deque = deque(maxlen=window_size)
        self.total = 0.0
        self.count = 0
        self.fmt = fmt

    def update(self, value, n=1):
        self.deque.append(value)
        self.count += n
        self.total += value * n

    @property
    def median(self):
        return float(np.median(list(self.deque)))

    @property
    def avg(self):
        return float(np.mean(list(self.deque)))

    @property
    def global_avg(self):
        return self.total / self.count

    @property
    def max(self):
        return max(self.deque)

    @property
    def value(self):
        return self.deque[-1]

    def __str__(self):
        return self.fmt.format(
            median=self.median,
            avg=self.avg,
            global_avg=self.global_avg,
            max=self.max,
            value=self.value)


class MetricLogger(object):
    def __init__(self, delimiter="\t"):
        self.meters = defaultdict(SmoothedValue)
        self.delimiter = delimiter

    def update(self, **kwargs):
        for k, v in kwargs.items():
            if isinstance(v, np.generic):
                v = v.item()
            assert isinstance(v, (float, int)), 'meter {} got {}'.format(k, type(v))
            self.meters[k].update(v)

    def __getattr__(self, attr):
        if attr in self.meters:
            return self.meters[attr]
        if attr in self.__dict__:
            return self.__dict__[attr]
        raise AttributeError("'{}' object has no attribute '{}'".format(
            type(self).__name__, attr))

    def __str__(self):
        meter_str = []
        for name, meter in self.meters.items():
            if meter.count:
                meter_str.append("{}: {}".format(name, str(meter)))
        return self.delimiter.join(meter_str)

    def add_meter(self, name, meter):
        self.meters[name] = meter

    def log_every(self, iterable, print_freq, header=None, logger=None, total=None):
        """Yield from iterable, reporting progress every print_freq items."""
        emit = logger.info if logger is not None else print
        total = len(iterable) if total is None else total
        i = 0
        if not header:
            header = ''
        start_time = time.time()
        end = time.time()
        iter_time = SmoothedValue(fmt='{avg:.4f}')
        space_fmt = ':' + str(len(str(total))) + 'd'
        log_msg = self.delimiter.join([
            header,
            '[{0' + space_fmt + '}/{1}]',
            'eta: {eta}',
            '{meters}',
            'time: {time}',
        ])
        for obj in iterable:
            yield obj
            iter_time.update(time.time() - end)
            if i % print_freq == 0 or i == total - 1:
                eta_seconds = iter_time.global_avg * (total - i)
                eta_string = str(datetime.timedelta(seconds=int(eta_seconds)))
                emit(log_msg.format(i, total, eta=eta_string, meters=str(self), time=str(iter_time)))
            i += 1
            end = time.time()
        total_time = time.time() - start_time
        total_time_str = str(datetime.timedelta(seconds=int(total_time)))
        emit('{} Total time: {} ({:.4f} s / it)'.format(header, total_time_str, total_time / max(i, 1)))


def to_jsonable(obj):
    """Plain python containers and scalars, so any of the json backends can dump it."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, complex):
        return {'re': obj.real, 'im': obj.imag}
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def dumps(obj, indent=None):
    if indent is None:
        return json.dumps(to_jsonable(obj))
    return json.dumps(to_jsonable(obj), indent=indent)


def write_json(obj, path, indent=2):
    with open(path, 'w') as f:
        f.write(dumps(obj, indent=indent))


def append_log(stats, output_dir):
    """One JSON line per call in output_dir/log.txt."""
    with open(os.path.join(output_dir, 'log.txt'), 'a') as f:
        f.write(dumps(stats) + "\n")


def write_csv(df, path):
    """UTF-8, header row, '.' decimals, 17 significant digits."""
    if not isinstance(df, pd.DataFrame):
        df = pd.DataFrame(df)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, encoding='utf-8')


def deep_update(base, override):
    """Recursively merge override into base; override wins on scalar conflicts."""
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            base[k] = deep_update(base[k], v)
        else:
            base[k] = v
    return base


def config_hash(config):
    """SHA-256 of the canonical JSON of a config mapping."""
    canonical = std_json.dumps(to_jsonable(config), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def loglog_slope(x, y):
    """Least-squares slope of log y against log x."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
