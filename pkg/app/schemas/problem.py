from pydantic import BaseModel, ConfigDict, Field

# Invariants (energy >= 1, working_time <= hours, ...) are checked by
# problem_service.validate_problem so that a malformed file yields a full report
# instead of the first pydantic error.


class Load(BaseModel):
    """Schedulable load: power draw and required on-hours"""

    model_config = ConfigDict(frozen=True)

    energy: int = Field(..., description="Power consumption in kW")
    working_time: int = Field(..., description="Hours the load must be switched on")


class User(BaseModel):
    """Community member owning schedulable loads"""

    model_config = ConfigDict(frozen=True)

    e_max: int = Field(..., description="Maximum nominal power available to the user in kW")
    loads: list[Load] = Field(default_factory=list)


class ProsumerProblem(BaseModel):
    """Prosumer scheduling instance, as stored in problem JSON files"""

    model_config = ConfigDict(frozen=True)

    hours: int = Field(..., description="Number of scheduling hours H")
    prices: list[int] = Field(..., description="Hourly energy price in euro-cent/kWh, one per hour")
    users: list[User] = Field(default_factory=list)

    @property
    def num_schedule_bits(self) -> int:
        """H times the total number of loads"""
        return self.hours * sum(len(user.loads) for user in self.users)
