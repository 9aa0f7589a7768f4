"""Configuration management commands."""

import json
import os
import sys

import click
from pydantic import ValidationError

from multisub.config import (
    ENV_VARS,
    MultisubConfig,
    get_config_file,
    load_config,
    save_config,
)


@click.group()
def config():
    """Configuration management commands."""
    pass


@config.command()
def show():
    """Show current configuration."""
    config_file = get_config_file()
    config = load_config()

    click.echo(click.style("multisub Configuration", fg="blue", bold=True))
    click.echo(f"\nConfig file: {config_file}")

    if config_file.exists():
        click.echo(click.style("Status: Found", fg="green"))
    else:
        click.echo(click.style("Status: Not found (using defaults)", fg="yellow"))

    click.echo(click.style("\nCurrent Settings:", fg="blue"))
    click.echo(json.dumps(config.model_dump(), indent=2))

    active_env_vars = {var: os.getenv(var) for var in ENV_VARS if os.getenv(var)}

    if active_env_vars:
        click.echo(click.style("\nActive Environment Variables:", fg="blue"))
        for var, value in active_env_vars.items():
            click.echo(f"  {var}: {value}")


@config.command(name="set")
@click.argument("key")
@click.argument("value")
def set_value(key, value):
    """Set KEY (e.g. jsr.threads) to VALUE in the config file."""
    config_file = get_config_file()
    data = MultisubConfig().model_dump()
    if config_file.exists():
        try:
            data = json.loads(config_file.read_text())
        except json.JSONDecodeError:
            click.echo(click.style(f"Ignoring unreadable {config_file}", fg="yellow"))

    section, _, field = key.partition(".")
    if not field or section not in MultisubConfig.model_fields:
        click.echo(click.style(f"✗ Unknown setting {key!r}", fg="red"), err=True)
        sys.exit(1)
    data.setdefault(section, {})[field] = value

    try:
        updated = MultisubConfig.model_validate(data)
    except ValidationError as e:
        click.echo(click.style(f"✗ Invalid value for {key}: {e.errors()[0]['msg']}", fg="red"), err=True)
        sys.exit(1)
    if field not in getattr(updated, section).model_dump():
        click.echo(click.style(f"✗ Unknown setting {key!r}", fg="red"), err=True)
        sys.exit(1)

    save_config(updated)
    click.echo(click.style(f"✓ {key} = {getattr(getattr(updated, section), field)}", fg="green"))
