import logging

from flask import Blueprint, request

from src.config import VERSION
from src.models.run import RunRecord, db
from src.services.errors import LabError
from src.services.lab import execute
from src.services.reporting import store_run

logger = logging.getLogger(__name__)

api_bp = Blueprint('api', __name__)


def run_command(name, data=None):
    """Execute a lab command on a JSON body; 'store': true also records the run"""
    data = dict(data if data is not None else (request.get_json(silent=True) or {}))
    store = bool(data.pop('store', False))
    try:
        document = execute(name, data).document()
        if store:
            document['run_id'] = store_run(document).id
        document['status'] = 'success'
        return document
    except LabError as e:
        logger.warning('%s rejected: %s', name, e.message)
        return e.to_dict(), 400
    except Exception as e:
        logger.exception('%s failed', name)
        db.session.rollback()
        return {
            'status': 'error',
            'message': f'{name} failed: {str(e)}'
        }, 500


@api_bp.route('/')
def api_info():
    return {
        'service': 'dlab API',
        'version': VERSION,
        'endpoints': {
            'stats': '/api/stats',
            'runs': '/api/runs',
            'bounds': '/api/bounds/<formula>',
            'bound_presets': '/api/bounds/presets/<name>',
            'diophantine': '/api/diophantine/<approximation|exponent|trajectory|emass|divfrac|dani>',
            'fractal': '/api/fractal/<cylinders|sample|constants|box-count>',
            'lattice': '/api/lattice/<lambda0|phi|covolume|emm|reduce|psi>',
            'covering': '/api/covering/<run|bound>',
            'height': '/api/height/<verify|zeta|eta>',
            'export': '/api/export/<trajectory|cover>/csv',
            'health': '/health',
            'init_db': '/api/init-database'
        }
    }


@api_bp.route('/stats')
def get_stats():
    try:
        rows = db.session.query(RunRecord.subcommand, db.func.count(RunRecord.id)) \
            .group_by(RunRecord.subcommand).all()
        return {
            'status': 'success',
            'stats': {
                'runs': sum(count for _, count in rows),
                'by_subcommand': {name: count for name, count in rows}
            }
        }
    except Exception as e:
        return {
            'status': 'error',
            'message': f'Failed to retrieve stats: {str(e)}'
        }, 500
