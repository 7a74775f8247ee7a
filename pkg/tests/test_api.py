import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.main import create_app
from app.services.dispatch import DispatchService
from app.services.masking import generate_keys, mask, recover_state, verify_recovered
from conftest import TOY_HORIZON


@pytest.fixture
def client(toy_scenario):
    with TestClient(create_app(toy_scenario)) as c:
        yield c


@pytest.fixture
def masked_upload(toy_scenario):
    compact = DispatchService(toy_scenario).compacts()[0]
    keys = generate_keys(TOY_HORIZON, seed=17, policy=toy_scenario.masking)
    m = mask(compact, keys)
    body = {
        "bla_id": m.bla_id,
        "f1": m.f1.tolist(),
        "f2": m.f2.tolist(),
        "f3": m.f3.tolist(),
        "f4": m.f4.tolist(),
        "duplication": m.duplication,
    }
    return body, compact, keys


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy"}


def test_upload_solve_and_recover(client, masked_upload, toy_scenario):
    body, compact, keys = masked_upload
    uploaded = client.post("/dispatch/uploads", json=body)
    assert uploaded.status_code == 200
    payload = uploaded.json()
    assert payload["success"]
    assert payload["data"] == {"accepted": "BLA1", "pending": []}

    solved = client.post("/dispatch/solve")
    assert solved.status_code == 200
    assert solved.json()["data"]["status"] == "optimal"
    plain = DispatchService(toy_scenario).run_plaintext()
    assert solved.json()["data"]["objective"] == pytest.approx(plain.solution.objective, rel=1e-5)

    result = client.get("/dispatch/results/BLA1").json()["data"]
    x = recover_state(result["x_tilde"], keys.W)
    assert verify_recovered(compact, x, np.asarray(result["u"])).passed


def test_result_before_solve_is_a_conflict(client):
    response = client.get("/dispatch/results/BLA1")
    assert response.status_code == 409
    assert response.json()["detail"]["code"] == "UNAVAILABLE"


def test_solve_without_uploads_is_a_conflict(client):
    response = client.post("/dispatch/solve")
    assert response.status_code == 409
    assert "BLA1" in response.json()["detail"]["message"]


def test_unknown_bla(client, masked_upload):
    assert client.get("/dispatch/results/BLA9").status_code == 404
    body, _, _ = masked_upload
    response = client.post("/dispatch/uploads", json={**body, "bla_id": "BLA9"})
    assert response.status_code == 404
    assert response.json()["detail"]["code"] == "INVALID_PLACEMENT"


def test_upload_admits_only_masked_blocks(client, masked_upload):
    body, compact, _ = masked_upload
    response = client.post("/dispatch/uploads", json={**body, "R": compact.R.tolist()})
    assert response.status_code == 422


def test_upload_with_wrong_shapes(client, masked_upload):
    body, _, _ = masked_upload
    response = client.post("/dispatch/uploads", json={**body, "f4": body["f4"][:-1]})
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "INVALID_ARGUMENT"


def test_reset_drops_uploads(client, masked_upload):
    body, _, _ = masked_upload
    client.post("/dispatch/uploads", json=body)
    response = client.delete("/dispatch/session")
    assert response.status_code == 200
    assert response.json()["data"] == {"pending": ["BLA1"]}
    assert client.post("/dispatch/solve").status_code == 409


def test_audit_counts(client):
    response = client.get("/audit/counts", params={"T": 24, "M": 1, "scheme": "no_cet"})
    assert response.status_code == 200
    data = response.json()["data"]
    assert (data["equations"], data["unknowns"], data["verdict"]) == (6984, 5837, "over_determined")


@pytest.mark.parametrize("params", [{"T": 0, "M": 1}, {"T": 24, "M": 1, "scheme": "no_te"}])
def test_audit_counts_rejects_bad_queries(client, params):
    assert client.get("/audit/counts", params=params).status_code == 422


def test_infeasible_solve_is_a_bad_gateway(infeasible_scenario, masked_upload):
    body, _, _ = masked_upload
    with TestClient(create_app(infeasible_scenario)) as c:
        assert c.post("/dispatch/uploads", json=body).status_code == 200
        response = c.post("/dispatch/solve")
    assert response.status_code == 502
    assert response.json()["detail"]["code"] == "SOLVER_ERROR"
    assert "infeasible" in response.json()["detail"]["message"]
