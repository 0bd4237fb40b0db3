"""Measurement protocol modules"""
