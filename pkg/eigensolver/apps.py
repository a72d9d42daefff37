from django.apps import AppConfig


class EigensolverConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "eigensolver"
