from runner import db


def test_fingerprint_ignores_option_order():
    a = db.fingerprint(["net-sup", "--series", "alternating-harmonic", "--n", "0", "--k", "4"])
    b = db.fingerprint(["net-sup", "--k", "4", "--n", "0", "--series", "alternating-harmonic"])
    assert a == b
    assert len(a) == 64
    assert a != db.fingerprint(["net-sup", "--series", "alternating-harmonic", "--n", "0", "--k", "5"])
    assert a != db.fingerprint(["sign-stress", "--series", "alternating-harmonic", "--n", "0", "--k", "4"])


def test_record_run_upserts(ledger):
    argv = ["classify", "--series", "zero", "--record"]
    first = db.record_run(argv, "classify", 0, 0, "absolute")
    second = db.record_run(argv, "classify", 0, 3, "budget")
    assert first == second
    runs = db.list_runs()
    assert len(runs) == 1
    assert runs[0]["exitStatus"] == 3
    assert runs[0]["summary"] == "budget"
    assert runs[0]["argv"] == argv


def test_get_run(ledger):
    run_id = db.record_run(["subseries", "--series", "zero"], "subseries", 7, 0, output_path="out.json")
    run = db.get_run(run_id)
    assert run["seed"] == 7
    assert run["outputPath"] == "out.json"
    assert db.get_run("0" * 64) is None


def test_list_runs_limit(ledger):
    for n in range(5):
        db.record_run(["net-sup", "--series", "zero", "--k", str(n)], "net-sup", 0, 0)
    assert len(db.list_runs(limit=3)) == 3
    assert len(db.list_runs()) == 5
