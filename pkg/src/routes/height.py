from flask import Blueprint

from src.routes.api import run_command

height_bp = Blueprint('height', __name__)


@height_bp.route('/height/verify', methods=['POST'])
def verify():
    """Monte-Carlo contraction check; keep 'samples' small for interactive use"""
    return run_command('height-verify')


@height_bp.route('/height/zeta', methods=['POST'])
def zeta():
    return run_command('zeta')


@height_bp.route('/height/eta', methods=['POST'])
def eta():
    return run_command('eta')
