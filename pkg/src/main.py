import os
import sys
from flask import Flask
from flask_cors import CORS

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.config import VERSION, configure_logging, settings
from src.models.run import RunRecord, db
from src.services.lab import SEED_PRESETS, seed_preset_runs

# Import all route blueprints
from src.routes.api import api_bp
from src.routes.runs import runs_bp
from src.routes.bounds import bounds_bp
from src.routes.diophantine import diophantine_bp
from src.routes.fractal import fractal_bp
from src.routes.lattice import lattice_bp
from src.routes.covering import covering_bp
from src.routes.height import height_bp
from src.routes.export import export_bp

configure_logging(settings.log_level)

app = Flask(__name__)

# Configuration
app.config['SECRET_KEY'] = os.environ.get('SECRET_KEY', 'dev-secret-key-change-in-production')

# Database configuration - supports both PostgreSQL (production) and SQLite (development)
database_url = os.environ.get('DATABASE_URL')
if database_url:
    if database_url.startswith('postgres://'):
        database_url = database_url.replace('postgres://', 'postgresql://', 1)
    app.config['SQLALCHEMY_DATABASE_URI'] = database_url
else:
    os.makedirs(os.path.join(os.path.dirname(__file__), 'database'), exist_ok=True)
    app.config['SQLALCHEMY_DATABASE_URI'] = f"sqlite:///{os.path.join(os.path.dirname(__file__), 'database', 'app.db')}"

app.config['SQLALCHEMY_TRACK_MODIFICATIONS'] = False

# Enable CORS for all routes
CORS(app, origins=['*'])

db.init_app(app)

app.register_blueprint(api_bp, url_prefix='/api')
app.register_blueprint(runs_bp, url_prefix='/api')
app.register_blueprint(bounds_bp, url_prefix='/api')
app.register_blueprint(diophantine_bp, url_prefix='/api')
app.register_blueprint(fractal_bp, url_prefix='/api')
app.register_blueprint(lattice_bp, url_prefix='/api')
app.register_blueprint(covering_bp, url_prefix='/api')
app.register_blueprint(height_bp, url_prefix='/api')
app.register_blueprint(export_bp, url_prefix='/api')


@app.route('/health')
def health_check():
    return {'status': 'healthy', 'service': 'dlab-backend', 'version': VERSION}


# Seeds the registry with the canonical bound presets
@app.route('/api/init-database', methods=['POST', 'GET'])
def init_database():
    try:
        existing = RunRecord.query.filter(RunRecord.subcommand == 'bound').count()
        if existing > 0:
            return {
                'status': 'already_initialized',
                'message': f'Database already has {existing} bound runs',
                'runs': existing
            }

        records = seed_preset_runs()
        return {
            'status': 'success',
            'message': f'Stored {len(records)} preset bound runs',
            'presets': list(SEED_PRESETS),
            'runs': [record.to_dict() for record in records]
        }
    except Exception as e:
        db.session.rollback()
        return {
            'status': 'error',
            'message': f'Failed to initialize database: {str(e)}'
        }, 500


@app.route('/')
def index():
    return {
        'message': 'dlab API',
        'status': 'running',
        'health': '/health',
        'api': '/api/'
    }


with app.app_context():
    try:
        db.create_all()
        print("✅ Database tables created successfully", file=sys.stderr)
    except Exception as e:
        print(f"❌ Error creating database tables: {e}", file=sys.stderr)


if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    debug = os.environ.get('FLASK_ENV') == 'development'
    app.run(host='0.0.0.0', port=port, debug=debug)
