"""
URL configuration: only the admin site, for browsing the run registry.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
