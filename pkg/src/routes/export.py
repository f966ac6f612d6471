import logging
from datetime import datetime

from flask import Blueprint, request

from src.models.run import RunRecord
from src.services.errors import LabError
from src.services.lab import execute
from src.services.reporting import csv_text

logger = logging.getLogger(__name__)

export_bp = Blueprint('export', __name__)

# export name -> (lab command, table)
TABLES = {
    'trajectory': ('trajectory', 'trajectory'),
    'cover': ('cover', 'cover'),
    'cover-steps': ('cover', 'steps'),
    'exponent': ('exponent', 'curve'),
    'divfrac': ('divfrac', 'surface'),
}


@export_bp.route('/export/<name>/csv', methods=['POST'])
def export_csv(name):
    """Run a command and return one of its tables as CSV text"""
    if name not in TABLES:
        return {'status': 'error', 'message': f'Nothing to export under {name}'}, 404
    command, table = TABLES[name]
    data = request.get_json(silent=True) or {}
    try:
        outcome = execute(command, data)
    except LabError as e:
        return e.to_dict(), 400
    except Exception as e:
        logger.exception('export of %s failed', name)
        return {'status': 'error', 'message': str(e)}, 500

    rows = outcome.tables.get(table, [])
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    return {
        'csv_data': csv_text(rows),
        'filename': f'{name}_export_{timestamp}.csv',
        'total_rows': len(rows),
        'header': outcome.document()['header'],
        'export_timestamp': datetime.now().isoformat()
    }


@export_bp.route('/export/runs/csv', methods=['GET'])
def export_runs_csv():
    """The run registry as a table of configs"""
    subcommand = request.args.get('subcommand')
    query = RunRecord.query
    if subcommand:
        query = query.filter(RunRecord.subcommand == subcommand)
    runs = query.order_by(RunRecord.id).all()
    rows = [run.to_dict(with_summary=False) for run in runs]
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    return {
        'csv_data': csv_text(rows),
        'filename': f'runs_export_{timestamp}.csv',
        'total_rows': len(rows),
        'export_timestamp': datetime.now().isoformat()
    }
