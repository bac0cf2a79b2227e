import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from eivdc.service.app import create_app

SCHEMA = {"firm": "firm", "year": "year", "y": "inv", "x": "q", "z": ["cf"]}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def noiseless_csv():
    """y = 0.4 + 0.5 x + 0.2 z exactly; two firms, three years."""
    rng = np.random.default_rng(8)
    lines = ["firm,year,inv,q,cf"]
    for firm in (0, 1):
        for year in (1, 2, 3):
            x = float(rng.normal())
            z = float(rng.normal())
            y = 0.4 + 0.5 * x + 0.2 * z
            lines.append(f"{firm},{year},{y!r},{x!r},{z!r}")
    return "\n".join(lines) + "\n"


def degenerate_3m_csv():
    # demeaned x, y with sum(x^2 y) = 0 exactly
    rows = [
        "firm,year,inv,q,cf",
        "0,1,1.0,1.0,0.0", "0,2,1.0,-1.0,0.0",
        "1,1,-1.0,1.0,0.0", "1,2,-1.0,-1.0,0.0",
    ]
    return "\n".join(rows) + "\n"


class TestHealth:
    def test_ok(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"


class TestSimulate:
    def test_row_count_and_determinism(self, client):
        payload = {"dgp": {"n": 40, "T": 3}, "seed": 5}
        a = client.post("/simulate", json=payload)
        b = client.post("/simulate", json=payload)
        assert a.status_code == 200
        body = a.json()
        assert body["n_obs"] == 120
        assert body["csv_content"].count("\n") == 121  # header + rows
        assert body["csv_content"] == b.json()["csv_content"]

    def test_beta_moves_the_slope(self, client):
        def slope(beta):
            r = client.post(
                "/simulate", json={"dgp": {"n": 2000, "T": 3, "beta": beta}, "seed": 9}
            )
            est = client.post("/estimate", json={
                "csv_content": r.json()["csv_content"],
                "panel_schema": {"firm": "firm", "year": "year", "y": "y",
                                 "x": "x", "z": ["z1"]},
                "method": "ols", "seed": 1,
            })
            return est.json()["beta_hat"]

        # attenuated slope difference ~ 0.44 * 0.025 = 0.011
        diff = slope(0.025) - slope(0.0)
        assert diff == pytest.approx(0.011, abs=0.004)

    def test_invalid_dgp_maps_to_usage(self, client):
        r = client.post("/simulate", json={"dgp": {"n": 40, "T": 3, "tau_sq": 2.0}})
        assert r.status_code == 400
        assert r.json()["error_class"] == "usage"


class TestEstimate:
    def test_ols_exact_on_noiseless_fixture(self, client):
        r = client.post("/estimate", json={
            "csv_content": noiseless_csv(), "panel_schema": SCHEMA,
            "method": "ols", "seed": 3,
        })
        assert r.status_code == 200
        body = r.json()
        assert body["beta_hat"] == pytest.approx(0.5, abs=1e-10)
        assert body["gamma_names"] == ["const", "cf"]
        assert body["gamma_hat"][0] == pytest.approx(0.4, abs=1e-10)
        assert body["gamma_hat"][1] == pytest.approx(0.2, abs=1e-10)

    def test_dc_matches_library_call(self, client, desk_panel, tmp_path):
        from eivdc.data_model import write_panel_csv
        from eivdc.experiments import estimate_panel

        path = tmp_path / "panel.csv"
        write_panel_csv(desk_panel, path, SCHEMA)
        r = client.post("/estimate", json={
            "csv_content": path.read_text(), "panel_schema": SCHEMA,
            "method": "dc", "blocks_per_year": 2, "fe": True, "seed": 42,
        })
        assert r.status_code == 200
        body = r.json()
        want = estimate_panel(desk_panel, "dc", blocks_per_year=2, fe=True, seed=42)
        assert body["beta_hat"] == want.beta_hat
        assert body["ci_beta"] == [want.ci_beta[0], want.ci_beta[1]]
        assert body["subsample_estimates"] == [float(v) for v in want.subsample_estimates]

    def test_degenerate_3m_maps_to_degeneracy(self, client):
        r = client.post("/estimate", json={
            "csv_content": degenerate_3m_csv(),
            "panel_schema": {**SCHEMA, "z": []},
            "method": "3m", "seed": 0,
        })
        assert r.status_code == 400
        body = r.json()
        assert body["error_class"] == "degeneracy"
        assert "ill-defined" in body["message"]

    def test_missing_column_maps_to_data(self, client):
        r = client.post("/estimate", json={
            "csv_content": "a,b\n1,2\n", "panel_schema": SCHEMA,
            "method": "ols",
        })
        assert r.status_code == 400
        assert r.json()["error_class"] == "data"

    def test_report_validates_against_shipped_schema(self, client):
        import jsonschema

        r = client.post("/estimate", json={
            "csv_content": noiseless_csv(), "panel_schema": SCHEMA,
            "method": "ols", "seed": 3,
        })
        schema_path = (
            Path(__file__).parent.parent
            / "src" / "eivdc" / "resources" / "estimate_report.schema.json"
        )
        schema = json.loads(schema_path.read_text())
        jsonschema.validate(r.json(), schema)


class TestMc:
    def test_small_run_shape(self, client):
        r = client.post("/mc", json={
            "dgp": {"n": 80, "T": 2}, "reps": 3,
            "methods": ["ols", "dc1"], "specs": [1], "seed": 11,
        })
        assert r.status_code == 200
        body = r.json()
        methods = {c["method"] for c in body["cells"]}
        assert methods == {"OLS", "DC(2)"}
        assert body["csv_content"].startswith("method,spec,coef")
        assert "OLS" in body["table_text"]
        assert body["config"]["reps"] == 3


class TestExpandWindow:
    def test_rows_per_year_method_coef(self, client, desk_panel, tmp_path):
        from eivdc.data_model import write_panel_csv

        path = tmp_path / "panel.csv"
        write_panel_csv(desk_panel, path, SCHEMA)
        r = client.post("/expand-window", json={
            "csv_content": path.read_text(), "panel_schema": SCHEMA,
            "start_end": 3, "methods": ["ols", "dc1"], "fe": True, "seed": 2,
        })
        assert r.status_code == 200
        rows = r.json()["rows"]
        # 3 windows (ends 3, 4, 5) x 2 methods x 2 coefficients
        assert len(rows) == 12
        assert {row["coef"] for row in rows} == {"beta", "z1"}
