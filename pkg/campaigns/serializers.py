import re

from rest_framework import serializers


COMMANDS = ("spectrum", "nodal", "solve", "verify")
DIGEST = re.compile(r"^[0-9a-f]{64}$")


class RunManifestSerializer(serializers.Serializer):
    command = serializers.ChoiceField(choices=COMMANDS)
    args = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    options = serializers.DictField(required=False, default=dict)
    seed = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    output_dir = serializers.CharField()
    formats = serializers.ListField(child=serializers.CharField(allow_blank=True), required=False, default=list)
    outputs = serializers.DictField(child=serializers.CharField())
    versions = serializers.DictField(child=serializers.CharField(), required=False, default=dict)
    created_at = serializers.CharField(required=False, allow_blank=True, default="")

    def validate_outputs(self, value):
        if not value:
            raise serializers.ValidationError("A run must record at least one output")
        for name, digest in value.items():
            if "/" in name or "\\" in name or name.startswith("."):
                raise serializers.ValidationError(f"Output {name} must be a plain file name")
            if not DIGEST.match(digest):
                raise serializers.ValidationError(f"Output {name} has no SHA-256 digest")
        return value

    def validate_options(self, value):
        if "out" in value:
            raise serializers.ValidationError("The output directory belongs in output_dir")
        return value
