from functools import wraps
from config.log_config import LoggingConfig

err_console = LoggingConfig().err_console

def step(func):
    """Decorator to add logging functionality to a CLI step."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        err_console.print(f"Running step: {func.__name__}", style="system")
        result = func(*args, **kwargs)
        err_console.print(f"Step finished: {func.__name__}", style="system")
        return result
    return wrapper
