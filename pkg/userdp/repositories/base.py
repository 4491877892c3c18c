from abc import ABC, abstractmethod
from pathlib import Path
from typing import Generic, TypeVar

T = TypeVar("T")


class Repository(ABC, Generic[T]):
    """A single file holding one persisted value."""

    def __init__(self, path: Path | str):
        self.path = Path(path)

    @abstractmethod
    def create(self, model: T) -> Path:
        pass

    @abstractmethod
    def load(self) -> T:
        pass

    def delete(self) -> None:
        self.path.unlink(missing_ok=True)
