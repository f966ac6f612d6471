from flask import Blueprint, jsonify, request

from src.models.run import RunRecord, db

runs_bp = Blueprint('runs', __name__)


@runs_bp.route('/runs', methods=['GET'])
def get_runs():
    """List stored runs, newest first"""
    page = request.args.get('page', 1, type=int)
    per_page = request.args.get('per_page', 20, type=int)
    subcommand = request.args.get('subcommand')

    query = RunRecord.query
    if subcommand:
        query = query.filter(RunRecord.subcommand == subcommand)
    runs = query.order_by(RunRecord.created_at.desc(), RunRecord.id.desc()).paginate(
        page=page,
        per_page=per_page,
        error_out=False
    )

    return jsonify({
        'runs': [run.to_dict(with_summary=False) for run in runs.items],
        'total': runs.total,
        'pages': runs.pages,
        'current_page': page,
        'per_page': per_page,
        'has_next': runs.has_next,
        'has_prev': runs.has_prev
    })


@runs_bp.route('/runs/<int:run_id>', methods=['GET'])
def get_run(run_id):
    run = db.get_or_404(RunRecord, run_id)
    return jsonify(run.to_dict())


@runs_bp.route('/runs/<int:run_id>', methods=['DELETE'])
def delete_run(run_id):
    run = db.get_or_404(RunRecord, run_id)
    try:
        db.session.delete(run)
        db.session.commit()
        return jsonify({'status': 'success', 'message': f'Run {run_id} deleted'})
    except Exception as e:
        db.session.rollback()
        return jsonify({'status': 'error', 'message': str(e)}), 500
