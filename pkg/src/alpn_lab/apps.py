from django.apps import AppConfig


class AlpnLabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'alpn_lab'
    verbose_name = 'Adaptive learning path lab'
