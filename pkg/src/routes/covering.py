from flask import Blueprint

from src.routes.api import run_command

covering_bp = Blueprint('covering', __name__)


@covering_bp.route('/covering/run', methods=['POST'])
def cover_run():
    return run_command('cover')


@covering_bp.route('/covering/bound', methods=['POST'])
def cover_bound():
    return run_command('cover-bound')
