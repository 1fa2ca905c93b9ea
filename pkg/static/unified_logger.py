import json
import logging
import os
import sys
from datetime import datetime
from typing import Any, Dict, List, Optional


class UnifiedLogger:
    """Run-scoped logger: console output plus structured entries saved next to the results"""

    def __init__(self, run_id: str, module_name: str, level: str = "INFO"):
        self.run_id = run_id
        self.module_name = module_name
        self.log_entries: List[Dict[str, Any]] = []

        self.console_logger = logging.getLogger(f"{module_name}_{run_id}")
        self.console_logger.setLevel(getattr(logging, level.upper(), logging.INFO))
        self.console_logger.propagate = False

        if not self.console_logger.handlers:
            handler = logging.StreamHandler(sys.stderr)
            formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
            handler.setFormatter(formatter)
            self.console_logger.addHandler(handler)

    def log(self, level: str, message: str, extra_data: Dict[str, Any] = None):
        """Log message with optional extra data"""
        entry = {
            'timestamp': datetime.now().isoformat(),
            'module': self.module_name,
            'level': level.upper(),
            'message': message,
            'run_id': self.run_id,
        }

        if extra_data:
            entry['extra_data'] = extra_data

        self.log_entries.append(entry)

        getattr(self.console_logger, level.lower())(f"[{self.module_name}] {message}")

    def info(self, message: str, extra_data: Dict[str, Any] = None):
        self.log('INFO', message, extra_data)

    def warning(self, message: str, extra_data: Dict[str, Any] = None):
        self.log('WARNING', message, extra_data)

    def error(self, message: str, extra_data: Dict[str, Any] = None):
        self.log('ERROR', message, extra_data)

    def debug(self, message: str, extra_data: Dict[str, Any] = None):
        self.log('DEBUG', message, extra_data)

    def save_logs(self, directory: str) -> Optional[str]:
        """Write all entries as one JSON document under `directory`"""
        try:
            os.makedirs(directory, exist_ok=True)
            timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
            path = os.path.join(directory, f"{self.module_name}_{self.run_id}_{timestamp}.json")

            log_data = {
                'module': self.module_name,
                'run_id': self.run_id,
                'log_count': len(self.log_entries),
                'logs': self.log_entries,
            }

            with open(path, 'w', encoding='utf-8') as f:
                json.dump(log_data, f, indent=2, ensure_ascii=False, default=str)
            self.console_logger.info(f"Logs saved to: {path}")
            return path

        except OSError as e:
            self.console_logger.error(f"Failed to save logs: {e}")
            return None
