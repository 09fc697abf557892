def test_health(client):
    r = client.get("/chirplet/v1/health")
    assert r.status_code == 200
    j = r.json()
    assert j["ok"] is True
    assert j["omegaMax"] > 0
    assert j["nFreq"] >= 2
