#!/usr/bin/env python3
"""
DATA OFFICER MODULE
==================
Responsable de la qualité des données.
Valide les lignes de résultats émises et le schéma de la télémétrie d'expérience.
"""

import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional

from src.utils.logger import ActionType, log_file_path
from src.utils.result_aggregator import ResultRow


class DataOfficer:
    """Gestionnaire de qualité des résultats et de la télémétrie."""

    REQUIRED_TOP_FIELDS = {
        'id', 'timestamp', 'component', 'action', 'details', 'status'
    }

    REQUIRED_DETAILS_FIELDS = {
        'experiment', 'layers'
    }

    VALID_ACTIONS = {a.value for a in ActionType}

    VALID_STATUSES = {'SUCCESS', 'FAILURE'}

    def __init__(self, log_file: Optional[str] = None):
        self.log_file = Path(log_file or log_file_path())
        self.logs = []
        self.validation_issues: List[str] = []
        self.warnings: List[str] = []
        self.load_logs()

    def load_logs(self) -> bool:
        """Charge la télémétrie depuis le fichier JSON."""
        if not self.log_file.exists():
            self.warnings.append(f"Telemetry file {self.log_file} does not exist yet")
            return False

        try:
            with open(self.log_file, 'r', encoding='utf-8') as f:
                content = f.read().strip()
            self.logs = json.loads(content) if content else []
            return True
        except json.JSONDecodeError as e:
            self.validation_issues.append(f"Corrupted telemetry JSON: {e}")
            return False

    def validate_schema(self) -> bool:
        """
        Valide que chaque entrée respecte le schéma de télémétrie.
        Retourne True si 100% conformité.
        """
        all_valid = True

        for idx, entry in enumerate(self.logs):
            missing_fields = self.REQUIRED_TOP_FIELDS - set(entry.keys())
            if missing_fields:
                self.validation_issues.append(f"Entry {idx}: missing fields {sorted(missing_fields)}")
                all_valid = False

            action = entry.get('action')
            if action not in self.VALID_ACTIONS:
                self.validation_issues.append(f"Entry {idx}: invalid action '{action}'")
                all_valid = False

            status = entry.get('status')
            if status not in self.VALID_STATUSES:
                self.validation_issues.append(f"Entry {idx}: invalid status '{status}'")
                all_valid = False

            # EMIT n'est rattaché à aucun point de balayage
            if action != ActionType.EMIT.value:
                details = entry.get('details', {})
                missing_details = self.REQUIRED_DETAILS_FIELDS - set(details.keys())
                if missing_details:
                    self.validation_issues.append(f"Entry {idx}: details missing {sorted(missing_details)}")
                    all_valid = False

        return all_valid

    @staticmethod
    def validate_rows(rows: List[ResultRow]) -> List[str]:
        """
        Vérifie les invariants des lignes de résultats.

        Args:
            rows: Emitted rows

        Returns:
            List of problems (empty when every row is valid)
        """
        problems = []
        seen = set()
        for idx, row in enumerate(rows):
            key = (row.L, row.scheme, row.metric)
            if key in seen:
                problems.append(f"Row {idx}: duplicate point {key}")
            seen.add(key)
            if row.L < 1:
                problems.append(f"Row {idx}: L must be >= 1, got {row.L}")
            if row.trials < 0:
                problems.append(f"Row {idx}: negative trial count {row.trials}")
            if row.trials == 0:
                # tous les essais ont été ignorés (canal de rang déficient)
                continue
            if not math.isfinite(row.mean):
                problems.append(f"Row {idx}: mean is not finite ({row.mean})")
            if not (row.stderr >= 0 and math.isfinite(row.stderr)):
                problems.append(f"Row {idx}: stderr must be finite and >= 0, got {row.stderr}")
            if row.metric.endswith("accuracy") and not 0.0 <= row.mean <= 1.0:
                problems.append(f"Row {idx}: accuracy {row.mean} outside [0, 1]")
            if row.seconds < 0:
                problems.append(f"Row {idx}: negative seconds {row.seconds}")
        return problems

    def get_statistics(self) -> Dict:
        """Calcule les statistiques de la télémétrie."""
        stats = {
            'total_entries': len(self.logs),
            'success_rate': 0.0,
            'components': defaultdict(int),
            'actions': defaultdict(int),
            'experiments': defaultdict(int),
        }
        if not self.logs:
            return stats

        success_count = 0
        for entry in self.logs:
            stats['components'][entry.get('component', 'UNKNOWN')] += 1
            stats['actions'][entry.get('action', 'UNKNOWN')] += 1
            experiment = entry.get('details', {}).get('experiment')
            if experiment:
                stats['experiments'][experiment] += 1
            if entry.get('status') == 'SUCCESS':
                success_count += 1

        stats['success_rate'] = (success_count / len(self.logs)) * 100
        return stats

    def generate_report(self, rows: Optional[List[ResultRow]] = None) -> str:
        """Génère un rapport de conformité (télémétrie et, si fournies, lignes de résultats)."""
        report = ["\n" + "=" * 70, "DATA OFFICER REPORT", "=" * 70]

        report.append("\n[1] TELEMETRY FILE")
        if self.log_file.exists():
            report.append(f"OK  {self.log_file} ({self.log_file.stat().st_size} bytes)")
        else:
            report.append(f"--  {self.log_file} absent")

        report.append("\n[2] TELEMETRY SCHEMA")
        if self.validate_schema():
            report.append("OK  all entries valid")
        else:
            report.append(f"ERR {len(self.validation_issues)} problems:")
            report.extend(f"    {issue}" for issue in self.validation_issues[:10])

        stats = self.get_statistics()
        report.append("\n[3] STATISTICS")
        report.append(f"    entries: {stats['total_entries']}, success rate: {stats['success_rate']:.1f}%")
        for action, count in sorted(stats['actions'].items()):
            report.append(f"    - {action}: {count}")

        if rows is not None:
            problems = self.validate_rows(rows)
            report.append("\n[4] RESULT ROWS")
            if problems:
                report.append(f"ERR {len(problems)} problems:")
                report.extend(f"    {problem}" for problem in problems[:10])
            else:
                report.append(f"OK  {len(rows)} rows valid")

        report.append("\n" + "=" * 70)
        return "\n".join(report)

