#!/usr/bin/env python3
"""
Entry point for the dlab Flask application.
Serves the API for deployment; the lab CLI is attached as `flask --app app lab ...`.
"""

import os

from src.main import app
from src.cli import cli

app.cli.add_command(cli, 'lab')

if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    app.run(host='0.0.0.0', port=port, debug=False)
