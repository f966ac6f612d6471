from flask import Blueprint, request

from src.routes.api import run_command

fractal_bp = Blueprint('fractal', __name__)

ACTIONS = ('cylinders', 'sample', 'constants', 'box-count')


@fractal_bp.route('/fractal/presets', methods=['GET'])
def get_presets():
    return run_command('ifs', {'action': 'presets'})


@fractal_bp.route('/fractal/<action>', methods=['POST'])
def fractal_action(action):
    if action not in ACTIONS:
        return {'status': 'error', 'message': f'Unknown fractal action {action}'}, 404
    data = dict(request.get_json(silent=True) or {})
    data['action'] = action
    return run_command('ifs', data)
