from pydantic import Field

from app.models.base import BaseModelSchema


class MaskedBlaUpload(BaseModelSchema):
    """
    Body of an upload to the DSO service.

    Only the masked blocks and the id are admitted; any other field is
    rejected by the schema.
    """
    bla_id: str = Field(..., min_length=1)
    f1: list[list[float]]
    f2: list[list[float]]
    f3: list[list[float]]
    f4: list[float]
    duplication: int = Field(default=2, ge=1)
