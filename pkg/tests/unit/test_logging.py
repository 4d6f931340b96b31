import logging

from twoscale.logging import configure_logging


def test_configure_logging(capsys):
    configure_logging(logging.INFO)
    logger = logging.getLogger("twoscale.corpus")
    logger.info("block %d passed", 1)
    logger.debug("hidden")
    err = capsys.readouterr().err
    assert "|INFO|twoscale.corpus:test_logging:block 1 passed" in err
    assert "hidden" not in err
    assert logging.getLogger("pyparsing").level == logging.WARNING
