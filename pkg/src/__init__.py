# -*- coding: utf-8 -*-
"""Fusion-Bench: MBQC compilation and photonic runtime simulation package."""
