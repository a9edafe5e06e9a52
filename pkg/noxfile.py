import nox


@nox.session
def lint(session):
    session.install(".[dev]")
    session.run("pylint", "dpxattn")


@nox.session
def tests(session):
    session.install(".[dev]")
    session.run("pytest", *session.posargs)
