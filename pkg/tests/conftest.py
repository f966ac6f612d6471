import os
import sys
from dataclasses import asdict

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# in-memory registry; must be set before src.main is imported
os.environ['DATABASE_URL'] = 'sqlite://'

from src.config import settings  # noqa: E402
from src.models.weights import Weights  # noqa: E402
from src.services.fractal import preset  # noqa: E402


@pytest.fixture(autouse=True)
def restore_settings():
    saved = asdict(settings)
    yield
    settings.update(**saved)


@pytest.fixture
def app():
    from src.main import app as flask_app
    from src.models.run import db

    flask_app.config['TESTING'] = True
    with flask_app.app_context():
        db.create_all()
        yield flask_app
        db.session.remove()
        db.drop_all()


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture
def unit_weights():
    return Weights.equal(1, 1)


@pytest.fixture
def cantor():
    return preset('cantor')


@pytest.fixture
def lattice_file(tmp_path):
    def write(text, name='lattice.txt'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return str(path)
    return write
