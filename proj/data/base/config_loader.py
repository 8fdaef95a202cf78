"""Reads layered settings from a mapping and the environment."""

import os

DEFAULTS = {
    "host": "localhost",
    "port": 8080,
    "debug": False,
}


def coerce(value, template):
    if isinstance(template, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(template, int):
        return int(value)
    return value


def load_settings(overrides=None, environ=None):
    environ = os.environ if environ is None else environ
    settings = dict(DEFAULTS)
    for key, template in DEFAULTS.items():
        env_key = "APP_" + key.upper()
        if env_key in environ:
            settings[key] = coerce(environ[env_key], template)
    if overrides:
        settings.update(overrides)
    return settings


def describe(settings):
    parts = []
    for key in sorted(settings):
        parts.append(f"{key}={settings[key]}")
    return ", ".join(parts)
