import logging

from efgn.logging_utils import LOGGER_NAME, configure_logging, get_logger


def test_get_logger_default_name():
    logger = get_logger()
    assert logger.name == LOGGER_NAME


def test_get_logger_custom_name():
    logger = get_logger("efgn.custom")
    assert logger.name == "efgn.custom"


def test_root_logger_has_one_handler():
    get_logger("efgn.a")
    get_logger("efgn.b")
    assert len(logging.getLogger(LOGGER_NAME).handlers) == 1


def test_configure_logging_sets_level():
    root = configure_logging("DEBUG")
    assert root.level == logging.DEBUG
    assert configure_logging("nonsense").level == logging.INFO
    configure_logging("INFO")
