from rich.console import Console
from rich.logging import RichHandler
from rich.theme import Theme
import logging

THEME = Theme({
    "event": "bold cyan",
    "info": "bold blue",
    "system": "dim",
    "report": "white",
    "warning": "yellow",
    "error": "bold red",
})

class LoggingConfig:
    """Config for logs. Reports go to stdout, diagnostics to stderr."""
    def __init__(self, level: int = logging.INFO):
        self.console = Console(theme=THEME, highlight=False)
        self.err_console = Console(theme=THEME, stderr=True, highlight=False)

        logger = logging.getLogger("ssc")
        if not any(isinstance(h, RichHandler) for h in logger.handlers):
            handler = RichHandler(console=self.err_console, show_time=False, show_path=False)
            logger.addHandler(handler)
            logger.propagate = False
            logger.setLevel(level)

    def set_verbose(self, verbose: bool) -> None:
        logging.getLogger("ssc").setLevel(logging.DEBUG if verbose else logging.INFO)
