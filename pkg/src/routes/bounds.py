from flask import Blueprint, request

from src.routes.api import run_command
from src.services.bounds import SCENARIOS, preset_names
from src.services.lab import FORMULAS

bounds_bp = Blueprint('bounds', __name__)


@bounds_bp.route('/bounds', methods=['GET'])
def list_formulas():
    return {
        'formulas': list(FORMULAS),
        'scenarios': list(SCENARIOS),
        'presets': preset_names()
    }


@bounds_bp.route('/bounds/<formula>', methods=['POST'])
def evaluate_bound(formula):
    """Evaluate one formula family; the body carries weights, fractal and the formula's parameters"""
    data = dict(request.get_json(silent=True) or {})
    data['formula'] = formula
    return run_command('bound', data)


@bounds_bp.route('/bounds/presets/<name>', methods=['GET'])
def get_preset(name):
    store = request.args.get('store', 'false').lower() == 'true'
    return run_command('bound', {'preset': name, 'store': store})
