from django.contrib import admin
from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    """Admin interface for the run registry."""

    list_display = ['variant', 'seed', 'status', 'episodes_completed', 'run_dir', 'updated_at']
    list_filter = ['variant', 'status', 'created_at']
    search_fields = ['run_dir', 'config_hash']
    readonly_fields = ['created_at', 'updated_at']
    ordering = ['-created_at']

    fieldsets = (
        ('Run', {
            'fields': ('run_dir', 'variant', 'seed', 'config_hash')
        }),
        ('Progress', {
            'fields': ('status', 'episodes_completed', 'last_checkpoint')
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at'),
            'classes': ('collapse',)
        }),
    )
