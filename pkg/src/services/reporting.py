"""
Reporting Service
JSON summaries with a reproducibility header, pandas CSV tables and the run registry
"""

import os
import io
import json
import math
import logging
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import mpmath
import numpy as np
import pandas as pd
import sympy

from src.config import VERSION, settings
from src.models.run import RunRecord, db

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.15g'


def jsonable(value: Any) -> Any:
    """Exact values become strings, floats stay floats, containers recurse"""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, float):
        return value if math.isfinite(value) else str(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, 30)
    if isinstance(value, sympy.Basic):
        return str(value)
    if hasattr(value, 'to_dict'):
        return jsonable(value.to_dict())
    return str(value)


def header(subcommand: str, config: Dict, seed: Optional[int] = None, prec: Optional[int] = None) -> Dict:
    return {
        'subcommand': subcommand,
        'version': VERSION,
        'seed': settings.seed if seed is None else seed,
        'precision': settings.prec if prec is None else prec,
        'config': jsonable(config),
    }


def summary_document(subcommand: str, config: Dict, result: Any, seed: Optional[int] = None,
                     prec: Optional[int] = None) -> Dict:
    return {'header': header(subcommand, config, seed, prec), 'result': jsonable(result)}


def dumps(document: Dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False)


def frame(rows: Sequence[Dict], columns: Optional[List[str]] = None) -> pd.DataFrame:
    df = pd.DataFrame([jsonable(row) for row in rows])
    if columns is not None:
        df = df.reindex(columns=columns)
    return df


def csv_text(rows: Sequence[Dict], columns: Optional[List[str]] = None) -> str:
    output = io.StringIO()
    frame(rows, columns).to_csv(output, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return output.getvalue()


def write_artifacts(out_dir: str, stem: str, document: Dict, tables: Optional[Dict[str, Sequence[Dict]]] = None) -> List[str]:
    """<stem>.json plus one <stem>_<name>.csv per table; returns the written paths"""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    summary_path = os.path.join(out_dir, f'{stem}.json')
    with open(summary_path, 'w', encoding='utf-8') as handle:
        handle.write(dumps(document) + '\n')
    paths.append(summary_path)
    for name, rows in (tables or {}).items():
        path = os.path.join(out_dir, f'{stem}_{name}.csv')
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(csv_text(rows))
        paths.append(path)
    logger.info('Wrote %d artifact(s) to %s', len(paths), out_dir)
    return paths


def store_run(document: Dict) -> RunRecord:
    """Persist a summary document; the caller owns the application context"""
    head = document['header']
    record = RunRecord(
        subcommand=head['subcommand'],
        config=head['config'],
        summary=document['result'],
        seed=head['seed'],
        version=head['version'],
    )
    try:
        db.session.add(record)
        db.session.commit()
    except Exception:
        db.session.rollback()
        raise
    logger.info('Stored run %s (%s)', record.id, record.subcommand)
    return record
