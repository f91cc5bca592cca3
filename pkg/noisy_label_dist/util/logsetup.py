'''
Logging setup for the command line tool.

Library code only ever calls logging.getLogger; handlers are installed here.
'''

import logging
from logging.config import dictConfig

def configureLogging(verbose=False):
    level = 'DEBUG' if verbose else 'INFO'

    cfg = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'stderr': {
                'format': '[%(levelname)s]: %(asctime)s - %(message)s',
                'datefmt': '%x %X'
            }
        },
        'handlers': {
            'stderr': {
                'class': 'logging.StreamHandler',
                'stream': 'ext://sys.stderr',
                'level': 'DEBUG',
                'formatter': 'stderr'
            }
        },
        'loggers': {
            'noisy_label_dist': {
                'handlers': ['stderr'],
                'level': level,
                'propagate': False
            }
        }
    }

    dictConfig(cfg)
    return logging.getLogger('noisy_label_dist')
