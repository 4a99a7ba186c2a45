def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for aid in mod.ACCEPTANCE_IDS:
        if aid in mod.RESULTS:
            terminalreporter.write_line(mod.line(mod.RESULTS[aid]))
