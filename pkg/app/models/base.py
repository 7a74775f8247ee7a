from pydantic import BaseModel, ConfigDict


class BaseModelSchema(BaseModel):
    """Base Pydantic model for validated inputs (scenario sections, options, requests)."""

    model_config = ConfigDict(
        from_attributes=True,
        str_strip_whitespace=True,
        validate_assignment=True,
        extra="forbid",
    )
