def test_health(client):
    response = client.get('/health')
    assert response.status_code == 200
    assert response.get_json()['service'] == 'dlab-backend'


def test_api_lists_endpoints(client):
    endpoints = client.get('/api/').get_json()['endpoints']
    assert endpoints['runs'] == '/api/runs'
    assert 'lattice' in endpoints


def test_bounds_listing(client):
    data = client.get('/api/bounds').get_json()
    assert 'fixed-xi' in data['formulas']
    assert 'cheung' in data['presets']


def test_stored_preset_shows_up_in_runs(client):
    response = client.get('/api/bounds/presets/cheung?store=true')
    assert response.status_code == 200
    data = response.get_json()
    assert data['status'] == 'success'
    assert data['result'][0]['value'] == '4/3'

    runs = client.get('/api/runs').get_json()
    assert runs['total'] == 1
    assert runs['runs'][0]['id'] == data['run_id']

    stored = client.get(f"/api/runs/{data['run_id']}").get_json()
    assert stored['subcommand'] == 'bound'


def test_preset_without_store_is_not_recorded(client):
    client.get('/api/bounds/presets/equal-1x1')
    assert client.get('/api/runs').get_json()['total'] == 0


def test_delete_run(client):
    run_id = client.get('/api/bounds/presets/cheung?store=true').get_json()['run_id']
    assert client.delete(f'/api/runs/{run_id}').get_json()['status'] == 'success'
    assert client.get(f'/api/runs/{run_id}').status_code == 404


def test_evaluate_formula(client):
    response = client.post('/api/bounds/fixed-xi', json={'weights': 'm=1,n=1', 'fractal': 'interval',
                                                         'omega': '1'})
    assert response.status_code == 200
    assert response.get_json()['result'][0]['value'] == '1/3'


def test_lattice_lambda0(client):
    response = client.post('/api/lattice/lambda0', json={'lattice': '4 0\n0 1/4\n'})
    assert response.status_code == 200
    assert response.get_json()['result']['lambda0']['value'] == '1/4'


def test_unknown_lattice_action(client):
    assert client.post('/api/lattice/volume', json={'lattice': '1 0\n0 1\n'}).status_code == 404


def test_bad_weights_are_rejected(client):
    response = client.post('/api/diophantine/trajectory',
                           json={'weights': 'm=2 n=1 a=1/3,2/3 b=1', 'theta': '0,0'})
    assert response.status_code == 400
    assert response.get_json()['code'] == 'invalid_weights'


def test_trajectory_endpoint(client):
    response = client.post('/api/diophantine/trajectory', json={'theta': '0', 't': '2', 'N': 3})
    assert response.status_code == 200
    assert response.get_json()['result']['lambda0'] == ['1/2', '1/4', '1/8']


def test_export_trajectory_csv(client):
    response = client.post('/api/export/trajectory/csv', json={'theta': '0', 't': '3', 'N': 3})
    data = response.get_json()
    assert data['total_rows'] == 3
    assert data['filename'].startswith('trajectory_export_')
    lines = data['csv_data'].splitlines()
    assert lines[0].startswith('k,t,log_t,lambda0,lambda0_affine')
    assert len(lines) == 4
    assert data['header']['subcommand'] == 'trajectory'


def test_export_unknown_table(client):
    assert client.post('/api/export/volumes/csv', json={}).status_code == 404


def test_init_database_seeds_presets_once(client):
    first = client.post('/api/init-database').get_json()
    assert first['status'] == 'success'
    assert len(first['runs']) == len(first['presets'])

    second = client.post('/api/init-database').get_json()
    assert second['status'] == 'already_initialized'

    stats = client.get('/api/stats').get_json()['stats']
    assert stats['by_subcommand']['bound'] == len(first['presets'])


def test_export_runs_csv(client):
    client.get('/api/bounds/presets/cheung?store=true')
    data = client.get('/api/export/runs/csv').get_json()
    assert data['total_rows'] == 1
    assert 'subcommand' in data['csv_data'].splitlines()[0]


def test_entry_point_mounts_the_lab_cli(app):
    import app as entry

    assert entry.app is app
    assert 'lab' in entry.app.cli.commands
