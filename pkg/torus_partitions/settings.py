import os
from pathlib import Path

from dotenv import load_dotenv

# --------------------------------------------------
# Base / Env setup
# --------------------------------------------------

BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")

# --------------------------------------------------
# Helper functions (MUST COME FIRST)
# --------------------------------------------------

def get_env(name: str, default: str | None = None) -> str | None:
    value = os.getenv(name, default)
    if value is None:
        return None
    cleaned = value.strip()
    if len(cleaned) >= 2 and cleaned[0] == cleaned[-1] and cleaned[0] in {"'", '"'}:
        cleaned = cleaned[1:-1].strip()
    return cleaned


def str_to_bool(value: str | None, default: bool = False) -> bool:
    if value is None:
        return default
    return value.lower() in {"1", "true", "yes", "on"}


def positive_int(value: str | None, default: int) -> int:
    try:
        parsed = int(value) if value is not None else default
    except ValueError:
        return default
    return parsed if parsed >= 1 else default


# --------------------------------------------------
# Core settings
# --------------------------------------------------

SECRET_KEY = get_env("SECRET_KEY", "dev-secret-key-change-me")

ENVIRONMENT = get_env("DJANGO_ENV", "development") or "development"
DEBUG = str_to_bool(get_env("DEBUG"), default=ENVIRONMENT != "production")

ALLOWED_HOSTS: list[str] = []

# --------------------------------------------------
# Applications
# --------------------------------------------------

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",

    # Third-party
    "rest_framework",

    # Local
    "spectrum",
    "nodal",
    "topology",
    "eigensolver",
    "optimizer",
    "campaigns",
]

# --------------------------------------------------
# Database
# --------------------------------------------------

# Nothing is persisted; the engine only satisfies Django's startup checks.
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}

# --------------------------------------------------
# Internationalization
# --------------------------------------------------

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"

USE_I18N = False
USE_TZ = True

# --------------------------------------------------
# Torus partition campaigns
# --------------------------------------------------

TPL_THREADS = positive_int(get_env("TPL_THREADS"), 1)
TPL_OUTPUT_DIR = Path(get_env("TPL_OUTPUT_DIR", str(BASE_DIR / "runs")) or BASE_DIR / "runs")
TPL_GROUP_TOLERANCE = float(get_env("TPL_GROUP_TOLERANCE", "1e-9") or "1e-9")
TPL_SEARCH_RADIUS_CAP = positive_int(get_env("TPL_SEARCH_RADIUS_CAP"), 10**6)
TPL_LOG_LEVEL = (get_env("TPL_LOG_LEVEL", "INFO") or "INFO").upper()

# --------------------------------------------------
# Logging
# --------------------------------------------------

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        app: {"handlers": ["console"], "level": TPL_LOG_LEVEL, "propagate": False}
        for app in ("spectrum", "nodal", "topology", "eigensolver", "optimizer", "campaigns")
    },
}

# --------------------------------------------------
# Defaults
# --------------------------------------------------

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"
