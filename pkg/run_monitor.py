import csv
import json
import logging
import os
import platform
from datetime import datetime
from typing import Any, Dict, Optional

import pandas as pd
import psutil

logger = logging.getLogger(__name__)

DEFAULT_LOG_DIR = os.path.expanduser("~/.skew_fsde_logs")

CSV_COLUMNS = [
    'timestamp', 'command', 'H', 'alpha', 'N', 'seed',
    'duration_seconds', 'cpu_percent', 'start_rss_mb', 'end_rss_mb', 'system_type'
]


class RunMonitor:
    def __init__(self, log_dir: Optional[str] = None):
        """
        Initialize the run monitor for tracking command resource usage

        Args:
            log_dir: Directory to store run logs (defaults to ~/.skew_fsde_logs)
        """
        self.start_usage: Optional[Dict[str, Any]] = None
        self.start_time: Optional[datetime] = None
        self.end_usage: Optional[Dict[str, Any]] = None
        self.end_time: Optional[datetime] = None
        self.system = platform.system()
        self.process = psutil.Process()

        self.log_dir = log_dir if log_dir is not None else DEFAULT_LOG_DIR
        os.makedirs(self.log_dir, exist_ok=True)

        self.json_log_file = os.path.join(self.log_dir, "runs.json")
        self.csv_log_file = os.path.join(self.log_dir, "runs.csv")

        if not os.path.exists(self.csv_log_file):
            with open(self.csv_log_file, 'w', newline='') as f:
                csv.writer(f).writerow(CSV_COLUMNS)

    def _get_resource_usage(self) -> Dict[str, Any]:
        """Current CPU time and resident memory of this process"""
        cpu = self.process.cpu_times()
        return {
            'cpu_seconds': cpu.user + cpu.system,
            'rss_mb': self.process.memory_info().rss / 2 ** 20,
        }

    def start_monitoring(self) -> Dict[str, Any]:
        """Start monitoring resource usage"""
        self.start_time = datetime.now()
        self.start_usage = self._get_resource_usage()
        return {'timestamp': self.start_time.isoformat(), **self.start_usage}

    def end_monitoring(self) -> Dict[str, Any]:
        """End monitoring and return resource usage statistics"""
        self.end_time = datetime.now()
        self.end_usage = self._get_resource_usage()
        duration_seconds = (self.end_time - self.start_time).total_seconds() if self.start_time else 0.0

        result: Dict[str, Any] = {
            'start_timestamp': self.start_time.isoformat() if self.start_time else None,
            'end_timestamp': self.end_time.isoformat(),
            'duration_seconds': duration_seconds,
            'system_type': self.system,
            'end_rss_mb': self.end_usage.get('rss_mb'),
        }
        if self.start_usage:
            cpu_used = self.end_usage['cpu_seconds'] - self.start_usage['cpu_seconds']
            result.update({
                'start_rss_mb': self.start_usage.get('rss_mb'),
                'cpu_percent': 100.0 * cpu_used / duration_seconds if duration_seconds > 0 else None,
            })
        return result

    def log_run(self, run_data: Dict[str, Any], command: str, config: Optional[Dict[str, Any]] = None) -> None:
        """
        Log one command run for later summaries

        Args:
            run_data: Dictionary from end_monitoring
            command: Subcommand name
            config: Run configuration as a plain dictionary
        """
        if not run_data:
            return
        config = config or {}
        timestamp = datetime.now().isoformat()
        log_entry = {
            'timestamp': timestamp,
            'command': command,
            'run_data': run_data,
            'config': config,
            'system_info': {
                'system': platform.system(),
                'machine': platform.machine(),
                'python': platform.python_version(),
            },
        }

        try:
            existing = []
            if os.path.exists(self.json_log_file):
                try:
                    with open(self.json_log_file, 'r') as f:
                        existing = json.load(f)
                except json.JSONDecodeError:
                    logger.warning("Run log %s is corrupt; starting a new one", self.json_log_file)
            if not isinstance(existing, list):
                existing = []
            existing.append(log_entry)
            with open(self.json_log_file, 'w') as f:
                json.dump(existing, f, indent=2, default=str)
        except OSError as e:
            logger.warning("Error logging run to JSON: %s", e)

        try:
            with open(self.csv_log_file, 'a', newline='') as f:
                csv.writer(f).writerow([
                    timestamp,
                    command,
                    config.get('H'),
                    config.get('alpha'),
                    config.get('N'),
                    config.get('seed'),
                    run_data.get('duration_seconds'),
                    run_data.get('cpu_percent'),
                    run_data.get('start_rss_mb'),
                    run_data.get('end_rss_mb'),
                    run_data.get('system_type'),
                ])
        except OSError as e:
            logger.warning("Error logging run to CSV: %s", e)

    def get_run_summary(self, command: Optional[str] = None, days: float = 7) -> Dict[str, Any]:
        """
        Summarize logged runs

        Args:
            command: Filter by subcommand
            days: Number of days to include in summary

        Returns:
            Dictionary with totals and a per-command breakdown
        """
        if not os.path.exists(self.csv_log_file):
            return {"error": "No run data available"}
        try:
            df = pd.read_csv(self.csv_log_file)
        except (OSError, pd.errors.ParserError) as e:
            return {"error": f"Error reading run log: {e}"}

        df['timestamp'] = pd.to_datetime(df['timestamp'], errors='coerce')
        cutoff = pd.Timestamp.now() - pd.Timedelta(days=days)
        df = df[df['timestamp'] >= cutoff]
        if command is not None:
            df = df[df['command'] == command]

        count = len(df)
        total_duration = float(df['duration_seconds'].fillna(0).sum())
        by_command = {
            str(name): {
                'count': int(len(group)),
                'total_duration_seconds': float(group['duration_seconds'].fillna(0).sum()),
                'mean_duration_seconds': float(group['duration_seconds'].mean()),
                'peak_rss_mb': float(group['end_rss_mb'].max()),
            }
            for name, group in df.groupby('command')
        }
        return {
            'total_runs': count,
            'total_duration_seconds': total_duration,
            'average_duration_seconds': total_duration / count if count > 0 else 0,
            'by_command': by_command,
            'days': days,
        }
