from flask import Blueprint, request

from src.routes.api import run_command

lattice_bp = Blueprint('lattice', __name__)

ACTIONS = ('lambda0', 'phi', 'covolume', 'emm', 'reduce', 'psi')


@lattice_bp.route('/lattice/<action>', methods=['POST'])
def lattice_action(action):
    """The body holds 'lattice' in the lattice file format plus the action's inputs"""
    if action not in ACTIONS:
        return {'status': 'error', 'message': f'Unknown lattice action {action}'}, 404
    data = dict(request.get_json(silent=True) or {})
    data['action'] = action
    return run_command('lattice', data)
