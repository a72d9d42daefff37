import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "torus_partitions.settings")
django.setup()
