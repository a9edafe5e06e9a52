# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Logging configuration"""

import logging

core_logger = logging.getLogger("dpxattn.core")


def setup_logging(debug: bool = False):
    """Set up the root logger for command line use"""
    logging.basicConfig(format="%(levelname)-7s %(asctime)s    %(message)s",
                        level=logging.DEBUG if debug else logging.INFO,
                        datefmt="%d/%m %H:%M:%S")
