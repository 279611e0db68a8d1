"""Two-phase rehabilitation scheduling: board assignment and session agendas."""

__version__ = "0.1.0"
