from flask import Blueprint

from src.routes.api import run_command

diophantine_bp = Blueprint('diophantine', __name__)


@diophantine_bp.route('/diophantine/approximation', methods=['POST'])
def approximation():
    """Best (p, q) for θ, ξ at horizon T"""
    return run_command('approximation')


@diophantine_bp.route('/diophantine/exponent', methods=['POST'])
def exponent():
    return run_command('exponent')


@diophantine_bp.route('/diophantine/trajectory', methods=['POST'])
def trajectory():
    return run_command('trajectory')


@diophantine_bp.route('/diophantine/emass', methods=['POST'])
def emass():
    return run_command('emass')


@diophantine_bp.route('/diophantine/divfrac', methods=['POST'])
def divfrac():
    return run_command('divfrac')


@diophantine_bp.route('/diophantine/dani', methods=['POST'])
def dani():
    return run_command('dani')
