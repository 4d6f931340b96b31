import logging

import pytest


@pytest.fixture(autouse=True)
def cleanup_logging():
    logging.getLogger("pyparsing").setLevel(logging.WARNING)
    yield
    # main() detaches the package logger from the root; caplog needs it back.
    logger = logging.getLogger("twoscale")
    logger.handlers.clear()
    logger.setLevel(logging.NOTSET)
    logger.propagate = True
