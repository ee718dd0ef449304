# app/main.py

"""
splitrec command line.

    python -m app.main pipeline --synthetic 100 --alpha 0.9 --seed 1
    python -m app.main id-collision --lengths 1..8 --users 31831
    python -m app.main alpha-sweep --alphas 0.5,0.6,0.7,0.8,0.9,0.95 --users 1000
"""

import click

from app import __version__
from app.routes import experiments, pipeline, split_demo


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="splitrec")
def cli():
    """Simulator and experiments for split-vector recommendation with random-walk upload."""


cli.add_command(split_demo.split_demo)
cli.add_command(pipeline.pipeline)
for command in experiments.COMMANDS:
    cli.add_command(command)


if __name__ == "__main__":
    cli(prog_name="splitrec")
