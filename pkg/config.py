import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent


class Config:
    DATA_DIR = Path(os.environ.get('TRAFFICLAB_DATA_DIR', BASE_DIR / 'data'))
    OUTPUT_DIR = Path(os.environ.get('TRAFFICLAB_OUTPUT_DIR', BASE_DIR / 'runs'))
    LOG_LEVEL = os.environ.get('TRAFFICLAB_LOG_LEVEL', 'INFO')
    DEVICE = os.environ.get('TRAFFICLAB_DEVICE', 'cpu')
    # simulated seconds per wall-clock second; below this a run logs a warning
    THROUGHPUT_TARGET = float(os.environ.get('TRAFFICLAB_THROUGHPUT_TARGET', '20.0'))
