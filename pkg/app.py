import json
import logging

from flask import Flask, jsonify, request
from werkzeug.exceptions import BadRequest, HTTPException, NotFound

# Import my custom modules
from cli import cli
from models.experiment import ExperimentConfig
from numerics.errors import ConfigError, ExperimentError
from services.experiment_service import ExperimentService
from services.report_service import report_render

logger = logging.getLogger(__name__)

# Initialize Flask app
app = Flask(__name__)
app.json.sort_keys = False

# Initialize services
experiment_service = ExperimentService()

# `flask --app app experiments bachet ...` runs the same commands as cli.py
app.cli.add_command(cli, name='experiments')


@app.route('/api/experiments', methods=['GET'])
def list_experiments():
    # Registered experiments with their default parameters
    return jsonify({'experiments': experiment_service.list_experiments()})


@app.route('/api/experiments/<name>', methods=['POST'])
def run_experiment(name):
    """
    Runs one experiment and returns its drift report.
    Body (optional JSON): {"parameters": {...}, "integrator": {...}, "seed": 0}
    """
    try:
        experiment_service.get(name)
    except ConfigError:
        raise NotFound(f"Unknown experiment: {name}")

    body = request.get_json(silent=True) or {}
    if not isinstance(body, dict):
        raise BadRequest('Request body must be a JSON object')

    config = ExperimentConfig(name, body.get('parameters'), body.get('integrator'),
                              body.get('seed', 0))
    outcome = experiment_service.run(config)
    report = json.loads(report_render(outcome.report, 'json'))
    return jsonify(report), 200


@app.errorhandler(ConfigError)
def config_error(error):
    return jsonify({'error': str(error), 'line': error.line, 'column': error.column}), 400


@app.errorhandler(ExperimentError)
def experiment_error(error):
    # Numerical failure inside a valid request
    logger.warning("Experiment %s failed: %s", error.experiment, error)
    return jsonify({'error': str(error), 'experiment': error.experiment}), 422


@app.errorhandler(HTTPException)
def http_error(error):
    return jsonify({'error': error.description}), error.code


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO)
    print("=" * 50)
    print("Integrable Systems Lab - Starting...")
    print("=" * 50)
    print(f"\n✓ {len(experiment_service.list_experiments())} experiments registered")
    print("➜ GET  http://127.0.0.1:5000/api/experiments")
    print("➜ POST http://127.0.0.1:5000/api/experiments/<name>")
    print("=" * 50)

    app.run(debug=True, host='0.0.0.0', port=5000)
