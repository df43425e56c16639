"""
Spinner shown while long pipeline stages run.
"""

from typing import Optional

from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TaskID, TextColumn


class StageSpinner:
    """
    Spinner with a status line that follows the pipeline stages.

    Disabled instances accept updates and print nothing.
    """

    def __init__(self, description: str, console: Optional[Console] = None, enabled: bool = True):
        self.description = description
        self.console = console
        self.enabled = enabled
        self._progress: Optional[Progress] = None
        self._task_id: Optional[TaskID] = None

    def __enter__(self):
        if self.enabled:
            self._progress = Progress(
                SpinnerColumn(),
                TextColumn("[bold blue]{task.description}"),
                TextColumn("[dim]{task.fields[status]}"),
                console=self.console,
                transient=True,
            )
            self._progress.start()
            self._task_id = self._progress.add_task(self.description, total=None, status="starting")
        return self

    def update(self, status: str) -> None:
        """Show the current stage."""
        if self._progress is not None and self._task_id is not None:
            self._progress.update(self._task_id, status=status)

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._progress is not None:
            self._progress.stop()
        return False
