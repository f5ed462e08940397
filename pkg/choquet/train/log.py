import logging
from typing import Dict, List, Optional

import pandas as pd

logger = logging.getLogger(__name__)


class TrainLog:
    """
    训练日志：每个生成器 (或 z) 更新一条记录，只能追加。
    列名在第一条记录时确定，之后的记录必须包含相同的列。
    """

    def __init__(self, columns: Optional[List[str]] = None):
        self.columns = list(columns) if columns else None
        self._records: List[Dict[str, float]] = []

    def append(self, **values: float):
        if self.columns is None:
            self.columns = list(values)
        missing = set(self.columns) - set(values)
        extra = set(values) - set(self.columns)
        if missing or extra:
            raise ValueError(f"log record columns differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
        self._records.append({key: float(values[key]) for key in self.columns})

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, index: int) -> Dict[str, float]:
        return dict(self._records[index])

    @property
    def last(self) -> Dict[str, float]:
        if not self._records:
            raise IndexError("log is empty")
        return dict(self._records[-1])

    def column(self, name: str) -> List[float]:
        return [record[name] for record in self._records]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self._records, columns=self.columns or [])

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False)
        logger.info(f"Wrote {len(self)} log records to {path}")

    def to_excel(self, path: str):
        self.to_frame().to_excel(path, index=False, engine="openpyxl")
        logger.info(f"Wrote {len(self)} log records to {path}")
