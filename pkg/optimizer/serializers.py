import json
from pathlib import Path

from rest_framework import serializers

from .services import OptimizerConfig, OptimizerConfigError


class OptimizerConfigSerializer(serializers.Serializer):
    k = serializers.IntegerField(min_value=2)
    nx = serializers.IntegerField(min_value=4, required=False, default=128)
    ny = serializers.IntegerField(min_value=4, required=False, default=32)
    seed = serializers.IntegerField(min_value=0, required=False, default=0)
    max_outer_iters = serializers.IntegerField(min_value=1, required=False, default=300)
    reassign_damping = serializers.FloatField(required=False, default=0.95)
    weight_step = serializers.FloatField(required=False, default=0.25)
    stop_changes = serializers.IntegerField(min_value=1, required=False, default=1)
    restarts = serializers.IntegerField(min_value=1, required=False, default=8)
    tol = serializers.FloatField(required=False, default=1e-6)

    def validate_reassign_damping(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError("Damping must lie in (0, 1]")
        return value

    def validate_weight_step(self, value):
        if value <= 0:
            raise serializers.ValidationError("Weight step must be positive")
        return value

    def validate_tol(self, value):
        if not 0 < value <= 1e-2:
            raise serializers.ValidationError("Tolerance must lie in (0, 1e-2]")
        return value

    def validate(self, attrs):
        if attrs["nx"] * attrs["ny"] < 4 * attrs["k"]:
            raise serializers.ValidationError("Grid too small for k domains")
        return attrs

    def to_config(self) -> OptimizerConfig:
        return OptimizerConfig(**self.validated_data)


def parse_config(data: dict, **overrides) -> OptimizerConfig:
    """Validate a config mapping; explicit overrides win over the mapping's values."""
    merged = {**data, **{key: value for key, value in overrides.items() if value is not None}}
    serializer = OptimizerConfigSerializer(data=merged)
    if not serializer.is_valid():
        raise OptimizerConfigError(json.dumps(serializer.errors, sort_keys=True))
    return serializer.to_config()


def load_config(path, **overrides) -> OptimizerConfig:
    path = Path(path)
    if not path.is_file():
        raise OptimizerConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise OptimizerConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise OptimizerConfigError(f"config file {path} must hold a JSON object")
    return parse_config(data, **overrides)
